// DOM rendering. Rows are keyed by idea id and replaced individually, so a
// trade message touches exactly the rows whose prices it changed: one row on
// a multi venue, every row on a single venue.
//
// Every price cell shows the server's decimal string verbatim, cash shows
// the server's number via String(), and each row carries the seq its prices
// were valid at in a data attribute.

import type { QuoteResult } from './api.js';
import { markValue, sidesFor, type ViewModel } from './model.js';

export interface OrderDraft {
  idea_id: string;
  side: string;
  direction: 'buy' | 'sell';
  quantity: number;
}

export interface UiHandlers {
  onOpenTicket: (ideaId: string, side: string, direction: 'buy' | 'sell') => void;
}

const STATUS_LABEL: Record<string, string> = {
  connecting: 'connecting',
  live: 'live',
  stale: 'stale - reconnecting',
  closed: 'closed',
};

export function buildSkeleton(root: HTMLElement): void {
  root.innerHTML = `
    <header>
      <h1>Idea market</h1>
      <span id="connection-badge" data-status="connecting">connecting</span>
      <nav>
        <button id="tab-summary" data-tab="summary">Ideas</button>
        <button id="tab-portfolio" data-tab="portfolio">Portfolio</button>
        <button id="tab-faq" data-tab="faq">FAQ</button>
      </nav>
    </header>
    <section id="register-panel">
      <form id="register-form">
        <label>Activation code
          <input id="activation-code" name="activation_code" autocomplete="off" />
        </label>
        <button id="register-submit" type="submit">Join</button>
        <span id="register-error" class="error" hidden></span>
      </form>
    </section>
    <section id="summary-panel" hidden>
      <div id="venue-banner"></div>
      <table id="idea-table">
        <thead id="idea-head"></thead>
        <tbody id="idea-rows"></tbody>
      </table>
    </section>
    <section id="portfolio-panel" hidden>
      <div id="portfolio-cash"></div>
      <svg id="value-chart" viewBox="0 0 600 160" width="600" height="160"></svg>
      <span id="chart-stale-badge" hidden>stale</span>
      <table id="holdings-table">
        <thead><tr><th>idea</th><th>side</th><th>shares</th></tr></thead>
        <tbody id="holdings-rows"></tbody>
      </table>
      <div id="transaction-count"></div>
    </section>
    <section id="faq-panel" hidden><div id="faq-body"></div></section>
    <dialog id="order-ticket">
      <form method="dialog" id="ticket-form">
        <h2 id="ticket-title"></h2>
        <label>Quantity <input id="ticket-quantity" type="number" min="1" step="1" value="10" /></label>
        <button id="ticket-quote" type="button">Get quote</button>
        <div id="ticket-preview" hidden>
          <div id="ticket-cost"></div>
          <ul id="ticket-prices"></ul>
        </div>
        <span id="ticket-error" class="error" hidden></span>
        <button id="ticket-confirm" type="button" disabled>Confirm</button>
        <button id="ticket-cancel" type="button">Cancel</button>
      </form>
    </dialog>
  `;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

export function renderConnection(vm: ViewModel): void {
  const badge = el('connection-badge');
  badge.dataset.status = vm.connection;
  badge.textContent = STATUS_LABEL[vm.connection] ?? vm.connection;
  const staleBadge = el('chart-stale-badge');
  staleBadge.hidden = vm.connection === 'live' || vm.connection === 'connecting';
}

function rowFor(vm: ViewModel, ideaId: string, handlers: UiHandlers): HTMLTableRowElement {
  const idea = vm.ideas.find((i) => i.idea_id === ideaId);
  if (idea === undefined) throw new Error(`unknown idea ${ideaId}`);
  const row = document.createElement('tr');
  row.dataset.ideaId = idea.idea_id;
  row.dataset.seq = String(idea.seq);

  const name = document.createElement('td');
  name.textContent = idea.title === '' ? idea.idea_id : idea.title;
  name.title = idea.description;
  row.appendChild(name);

  for (const side of sidesFor(vm)) {
    const cell = document.createElement('td');
    const price = document.createElement('span');
    price.className = 'price';
    price.dataset.side = side;
    price.textContent = idea.prices[side] ?? '';
    cell.appendChild(price);
    for (const direction of ['buy', 'sell'] as const) {
      const button = document.createElement('button');
      button.textContent = direction === 'buy' ? `Buy ${side}` : `Sell ${side}`;
      button.dataset.action = `${direction}-${side}`;
      button.disabled = vm.settled || !vmReady(vm);
      button.addEventListener('click', () => handlers.onOpenTicket(idea.idea_id, side, direction));
      cell.appendChild(button);
    }
    row.appendChild(cell);
  }
  return row;
}

function vmReady(vm: ViewModel): boolean {
  return vm.traderId !== null;
}

export function renderSummary(vm: ViewModel, handlers: UiHandlers): void {
  const banner = el('venue-banner');
  if (vm.venue !== null) {
    banner.textContent =
      `${vm.venue.venue_id} - ${vm.venue.design} design - ` +
      `${vm.venue.n_ideas} ideas - ${vm.settled ? 'settled' : 'open'}`;
  }
  const head = el('idea-head');
  const sideHeads = sidesFor(vm).map((s) => `<th>${s}</th>`).join('');
  head.innerHTML = `<tr><th>idea</th>${sideHeads}</tr>`;
  const body = el('idea-rows');
  body.textContent = '';
  for (const idea of vm.ideas) {
    body.appendChild(rowFor(vm, idea.idea_id, handlers));
  }
}

// Replace only the given rows; untouched rows keep their DOM nodes.
export function updateRows(vm: ViewModel, ideaIds: string[], handlers: UiHandlers): void {
  const body = el('idea-rows');
  for (const ideaId of ideaIds) {
    const current = body.querySelector(`tr[data-idea-id="${ideaId}"]`);
    if (current === null) continue;
    body.replaceChild(rowFor(vm, ideaId, handlers), current);
  }
}

export function renderPortfolio(vm: ViewModel): void {
  const cashBox = el('portfolio-cash');
  if (vm.cash === null) {
    cashBox.textContent = 'not registered';
  } else {
    cashBox.innerHTML = `cash <strong id="cash-amount">${String(vm.cash)}</strong>`;
    const value = markValue(vm);
    if (value !== null) {
      cashBox.innerHTML += ` - portfolio value <span id="portfolio-value">${value.toFixed(2)}</span>`;
    }
  }
  const rows = el('holdings-rows');
  rows.innerHTML = vm.holdings
    .map(
      (h) =>
        `<tr><td>${h.idea_id}</td><td>${h.side}</td><td data-holding="${h.idea_id}/${h.side}">${h.quantity}</td></tr>`,
    )
    .join('');
  el('transaction-count').textContent = `${vm.transactionCount} transactions`;
  renderChart(vm);
}

function renderChart(vm: ViewModel): void {
  const svg = el<HTMLElement>('value-chart');
  const points = vm.series;
  if (points.length === 0) {
    svg.innerHTML = '';
    return;
  }
  const values = points.map((p) => p.value);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const stepX = points.length > 1 ? 600 / (points.length - 1) : 0;
  const coords = points.map((p, i) => {
    const x = points.length > 1 ? i * stepX : 300;
    const y = 150 - ((p.value - lo) / span) * 140;
    return `${x.toFixed(1)},${y.toFixed(1)}`;
  });
  svg.innerHTML =
    `<polyline fill="none" stroke="currentColor" stroke-width="2" points="${coords.join(' ')}" />` +
    `<title>portfolio value, ${points.length} samples</title>`;
  svg.dataset.samples = String(points.length);
  svg.dataset.lastValue = String(points[points.length - 1]?.value ?? '');
}

// Minimal markdown: headings, bullets, paragraphs. Enough for the FAQ.
export function renderFaq(markdown: string): void {
  const target = el('faq-body');
  const blocks: string[] = [];
  let list: string[] = [];
  const flushList = () => {
    if (list.length > 0) {
      blocks.push(`<ul>${list.map((item) => `<li>${item}</li>`).join('')}</ul>`);
      list = [];
    }
  };
  for (const line of markdown.split('\n')) {
    const text = line.trim();
    if (text.startsWith('- ')) {
      list.push(escapeHtml(text.slice(2)));
      continue;
    }
    flushList();
    if (text === '') continue;
    const heading = /^(#{1,4})\s+(.*)$/.exec(text);
    if (heading !== null) {
      const level = Math.min(heading[1]!.length + 1, 5);
      blocks.push(`<h${level}>${escapeHtml(heading[2]!)}</h${level}>`);
    } else {
      blocks.push(`<p>${escapeHtml(text)}</p>`);
    }
  }
  flushList();
  target.innerHTML = blocks.join('\n');
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;');
}

// ---- order ticket -----------------------------------------------------------

export interface TicketElements {
  dialog: HTMLDialogElement;
  title: HTMLElement;
  quantity: HTMLInputElement;
  quoteButton: HTMLButtonElement;
  confirmButton: HTMLButtonElement;
  cancelButton: HTMLButtonElement;
  preview: HTMLElement;
  cost: HTMLElement;
  prices: HTMLElement;
  error: HTMLElement;
}

export function ticketElements(): TicketElements {
  return {
    dialog: el<HTMLDialogElement>('order-ticket'),
    title: el('ticket-title'),
    quantity: el<HTMLInputElement>('ticket-quantity'),
    quoteButton: el<HTMLButtonElement>('ticket-quote'),
    confirmButton: el<HTMLButtonElement>('ticket-confirm'),
    cancelButton: el<HTMLButtonElement>('ticket-cancel'),
    preview: el('ticket-preview'),
    cost: el('ticket-cost'),
    prices: el('ticket-prices'),
    error: el('ticket-error'),
  };
}

export function ticketQuantity(ticket: TicketElements): number {
  const qty = Number(ticket.quantity.value);
  return Number.isInteger(qty) && qty >= 1 ? qty : 0;
}

export function showTicket(ticket: TicketElements, draft: OrderDraft): void {
  ticket.title.textContent = `${draft.direction} ${draft.side} - ${draft.idea_id}`;
  ticket.quantity.value = String(draft.quantity);
  ticket.preview.hidden = true;
  ticket.error.hidden = true;
  ticket.confirmButton.disabled = true;
  refreshTicketControls(ticket);
  try {
    ticket.dialog.showModal();
  } catch {
    ticket.dialog.setAttribute('open', '');
  }
}

export function refreshTicketControls(ticket: TicketElements): void {
  const valid = ticketQuantity(ticket) >= 1;
  ticket.quoteButton.disabled = !valid;
  if (!valid) ticket.confirmButton.disabled = true;
}

export function showQuote(ticket: TicketElements, quote: QuoteResult): void {
  const cost = quote.cash_delta;
  ticket.cost.textContent =
    cost >= 0 ? `cost ${cost.toFixed(2)}` : `proceeds ${(-cost).toFixed(2)}`;
  ticket.prices.innerHTML = quote.prices_after
    .map((row) => `<li>${row.idea_id} ${row.side} -> <span class="price">${row.price}</span></li>`)
    .join('');
  ticket.preview.hidden = false;
  ticket.error.hidden = true;
  ticket.confirmButton.disabled = false;
}

export function showTicketError(ticket: TicketElements, message: string): void {
  ticket.error.textContent = message;
  ticket.error.hidden = false;
  ticket.confirmButton.disabled = true;
}

export function closeTicket(ticket: TicketElements): void {
  try {
    ticket.dialog.close();
  } catch {
    ticket.dialog.removeAttribute('open');
  }
}
