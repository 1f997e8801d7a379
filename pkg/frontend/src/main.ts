// Application wiring: one ViewModel, one API client, one price stream.
// All state changes flow through the pure reducers in model.ts, then the
// affected view fragments re-render.

import { ApiError, MarketApi, type FillResult, type VenueSummary } from './api.js';
import {
  applyFill,
  applyMessage,
  applyPortfolio,
  applyRegistration,
  initialModel,
  loadVenue,
  sampleSeries,
  setConnection,
  type ViewModel,
} from './model.js';
import {
  buildSkeleton,
  closeTicket,
  refreshTicketControls,
  renderConnection,
  renderFaq,
  renderPortfolio,
  renderSummary,
  showQuote,
  showTicket,
  showTicketError,
  ticketElements,
  ticketQuantity,
  updateRows,
  type OrderDraft,
  type TicketElements,
  type UiHandlers,
} from './render.js';
import { PriceStream, type StreamMessage, type StreamStatus } from './stream.js';

export interface AppOptions {
  fetchImpl?: typeof fetch;
}

export class TradingApp {
  vm: ViewModel = initialModel();
  readonly api: MarketApi;
  stream: PriceStream | null = null;

  private readonly root: HTMLElement;
  private ticket!: TicketElements;
  private draft: OrderDraft | null = null;
  private readonly fetchImpl: typeof fetch;
  private readonly handlers: UiHandlers = {
    onOpenTicket: (ideaId, side, direction) => this.openTicket(ideaId, side, direction),
  };

  constructor(root: HTMLElement, baseUrl: string, options: AppOptions = {}) {
    this.root = root;
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
    this.api = new MarketApi(baseUrl, this.fetchImpl);
  }

  async start(): Promise<void> {
    buildSkeleton(this.root);
    this.ticket = ticketElements();
    this.wireChrome();
    const venues = await this.api.venues();
    const venue = venues.find((v) => v.status === 'open') ?? venues[0];
    if (venue === undefined) throw new Error('service lists no venues');
    await this.loadVenue(venue);
    this.startStream(venue.venue_id, this.vm.lastSeq);
    renderConnection(this.vm);
    this.showTab('summary');
  }

  stop(): void {
    this.stream?.stop();
  }

  private async loadVenue(venue: VenueSummary): Promise<void> {
    const ideas = await this.api.ideas(venue.venue_id);
    this.vm = loadVenue(this.vm, venue, ideas);
    renderSummary(this.vm, this.handlers);
  }

  private startStream(venueId: string, fromSeq: number): void {
    this.stream = new PriceStream(
      this.api.baseUrl,
      venueId,
      {
        onMessage: (message) => this.onStreamMessage(message),
        onStatus: (status) => this.onStreamStatus(status),
      },
      fromSeq,
      this.fetchImpl,
    );
    this.stream.start();
  }

  private onStreamMessage(message: StreamMessage): void {
    const { vm, changedIdeas } = applyMessage(this.vm, message);
    this.vm = sampleSeries(vm);
    if (message.type === 'settled') {
      renderSummary(this.vm, this.handlers); // all controls off
    } else if (changedIdeas.length > 0) {
      updateRows(this.vm, changedIdeas, this.handlers);
    }
    renderPortfolio(this.vm);
  }

  private onStreamStatus(status: StreamStatus): void {
    this.vm = setConnection(this.vm, status);
    renderConnection(this.vm);
  }

  private wireChrome(): void {
    for (const tab of ['summary', 'portfolio', 'faq']) {
      document.getElementById(`tab-${tab}`)?.addEventListener('click', () => {
        void this.showTab(tab);
      });
    }
    const form = document.getElementById('register-form') as HTMLFormElement;
    form.addEventListener('submit', (event) => {
      event.preventDefault();
      void this.register();
    });
    this.ticket.quantity.addEventListener('input', () => refreshTicketControls(this.ticket));
    this.ticket.quoteButton.addEventListener('click', () => void this.quoteDraft());
    this.ticket.confirmButton.addEventListener('click', () => void this.confirmDraft());
    this.ticket.cancelButton.addEventListener('click', () => closeTicket(this.ticket));
  }

  async showTab(tab: string): Promise<void> {
    for (const name of ['summary', 'portfolio', 'faq']) {
      const panel = document.getElementById(`${name}-panel`);
      if (panel !== null) (panel as HTMLElement).hidden = name !== tab;
    }
    if (tab === 'portfolio' && this.api.authenticated) {
      await this.refreshPortfolio();
    }
    if (tab === 'faq') {
      const faqBody = document.getElementById('faq-body');
      if (faqBody !== null && faqBody.childElementCount === 0) {
        renderFaq(await this.api.faq());
      }
    }
  }

  async register(): Promise<void> {
    const input = document.getElementById('activation-code') as HTMLInputElement;
    const errorBox = document.getElementById('register-error') as HTMLElement;
    try {
      const result = await this.api.register(input.value.trim());
      this.vm = applyRegistration(this.vm, result.trader_id, result.cash);
      (document.getElementById('register-panel') as HTMLElement).hidden = true;
      errorBox.hidden = true;
      await this.refreshPortfolio();
      renderSummary(this.vm, this.handlers);
    } catch (error) {
      errorBox.textContent = error instanceof ApiError ? error.message : String(error);
      errorBox.hidden = false;
    }
  }

  async refreshPortfolio(): Promise<void> {
    const portfolio = await this.api.portfolio();
    this.vm = applyPortfolio(this.vm, portfolio);
    renderPortfolio(this.vm);
  }

  openTicket(ideaId: string, side: string, direction: 'buy' | 'sell'): void {
    this.draft = { idea_id: ideaId, side, direction, quantity: 10 };
    showTicket(this.ticket, this.draft);
  }

  private currentOrder(): OrderDraft | null {
    if (this.draft === null) return null;
    const quantity = ticketQuantity(this.ticket);
    if (quantity < 1) return null;
    return { ...this.draft, quantity };
  }

  async quoteDraft(): Promise<void> {
    const order = this.currentOrder();
    if (order === null || this.vm.venue === null) return;
    try {
      const quote = await this.api.quote(this.vm.venue.venue_id, order);
      showQuote(this.ticket, quote);
    } catch (error) {
      showTicketError(this.ticket, describe(error));
    }
  }

  async confirmDraft(): Promise<void> {
    const order = this.currentOrder();
    if (order === null || this.vm.venue === null) return;
    let fill: FillResult;
    try {
      fill = await this.api.placeOrder(this.vm.venue.venue_id, order);
    } catch (error) {
      showTicketError(this.ticket, describe(error));
      return;
    }
    this.vm = applyFill(this.vm, order, fill);
    closeTicket(this.ticket);
    renderPortfolio(this.vm);
    await this.refreshPortfolio(); // authoritative series for the chart
  }
}

function describe(error: unknown): string {
  if (error instanceof ApiError) {
    if (error.code === 'insufficient_cash') {
      const required = error.details['required'];
      const available = error.details['available'];
      return `insufficient cash: need ${String(required)}, have ${String(available)}`;
    }
    if (error.code === 'venue_settled') return 'venue is settled; trading is closed';
    return error.message;
  }
  return String(error);
}
