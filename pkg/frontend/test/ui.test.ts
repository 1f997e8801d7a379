// @vitest-environment jsdom
//
// UI behaviour against a scripted in-memory service. Checks the display
// contract: price strings pass through verbatim, confirmed-fill cash equals
// the server's new_cash exactly, a multi trade re-renders exactly one idea
// row while a single trade re-renders all of them.

import { beforeEach, describe, expect, it } from 'vitest';

import type { FillResult, IdeaRow, QuoteResult, VenueSummary } from '../src/api.js';
import { TradingApp } from '../src/main.js';

interface FakeService {
  fetchImpl: typeof fetch;
  pushFrame: (frame: string) => void;
  requests: { method: string; path: string }[];
  state: {
    venue: VenueSummary;
    ideas: IdeaRow[];
    quote: QuoteResult | null;
    fill: FillResult | { status: number; body: object } | null;
    portfolio: object;
  };
}

function frame(seq: number, payload: object): string {
  return `id: ${seq}\ndata: ${JSON.stringify({ seq, ...payload })}\n\n`;
}

function makeIdeas(design: 'single' | 'multi', n: number): IdeaRow[] {
  const prices: Record<string, string> =
    design === 'multi' ? { top: '0.5000', flop: '0.5000' } : { idea: (1 / n).toFixed(4) };
  return Array.from({ length: n }, (_, i) => ({
    idea_id: `idea-${String(i + 1).padStart(2, '0')}`,
    title: `Idea ${i + 1}`,
    description: `description ${i + 1}`,
    stratum: 'medium',
    prices: { ...prices },
  }));
}

function fakeService(design: 'single' | 'multi', n = 4): FakeService {
  const requests: { method: string; path: string }[] = [];
  let streamController: ReadableStreamDefaultController<Uint8Array> | null = null;
  const encoder = new TextEncoder();
  const state: FakeService['state'] = {
    venue: { venue_id: 'main', design, b: 548, status: 'open', n_ideas: n, seq: 1 },
    ideas: makeIdeas(design, n),
    quote: null,
    fill: null,
    portfolio: {
      trader_id: 'trader-001',
      cash: 5000.0,
      holdings: [],
      transaction_count: 0,
      value_series: [{ seq: 2, ts: 1.0, value: 5000.0 }],
    },
  };

  const fetchImpl = (async (input: RequestInfo | URL, init?: RequestInit) => {
    const url = new URL(String(input));
    const method = init?.method ?? 'GET';
    const path = url.pathname;
    requests.push({ method, path });
    const json = (body: unknown, status = 200) =>
      new Response(JSON.stringify(body), { status });

    if (method === 'GET' && path === '/venues') return json([state.venue]);
    if (method === 'GET' && path === '/venues/main/ideas') return json(state.ideas);
    if (method === 'GET' && path === '/portfolio') return json(state.portfolio);
    if (method === 'GET' && path === '/faq') return new Response('# FAQ\n- be kind');
    if (method === 'POST' && path === '/register') {
      return json({ token: 'tok', trader_id: 'trader-001', cash: 5000.0 });
    }
    if (method === 'POST' && path === '/venues/main/quote') {
      return state.quote !== null ? json(state.quote) : json({ error: 'x' }, 422);
    }
    if (method === 'POST' && path === '/venues/main/orders') {
      const fill = state.fill;
      if (fill !== null && 'status' in fill) return json(fill.body, fill.status);
      return fill !== null ? json(fill) : json({ error: 'x' }, 422);
    }
    if (method === 'GET' && path === '/venues/main/stream') {
      const body = new ReadableStream<Uint8Array>({
        start(controller) {
          streamController = controller;
        },
      });
      init?.signal?.addEventListener('abort', () => {
        try {
          streamController?.close();
        } catch {
          /* closed */
        }
      });
      return new Response(body, { status: 200 });
    }
    return json({ error: 'unknown_path', message: path }, 404);
  }) as typeof fetch;

  return {
    fetchImpl,
    requests,
    state,
    pushFrame: (text) => streamController?.enqueue(encoder.encode(text)),
  };
}

async function flush(ms = 20): Promise<void> {
  await new Promise((resolve) => setTimeout(resolve, ms));
}

async function startApp(design: 'single' | 'multi', n = 4) {
  document.body.innerHTML = '<div id="app"></div>';
  const service = fakeService(design, n);
  const app = new TradingApp(document.getElementById('app')!, 'http://svc', {
    fetchImpl: service.fetchImpl,
  });
  await app.start();
  await flush();
  return { app, service };
}

async function register(app: TradingApp): Promise<void> {
  (document.getElementById('activation-code') as HTMLInputElement).value = 'code';
  await app.register();
  await flush();
}

function rowNodes(): Map<string, Element> {
  return new Map(
    [...document.querySelectorAll('#idea-rows tr')].map((row) => [
      (row as HTMLElement).dataset.ideaId!,
      row,
    ]),
  );
}

let cleanup: TradingApp | null = null;
beforeEach(() => {
  cleanup?.stop();
  cleanup = null;
});

describe('summary rendering', () => {
  it('fresh multi venue shows 0.5000 / 0.5000 on every row', async () => {
    const { app } = await startApp('multi');
    cleanup = app;
    const prices = [...document.querySelectorAll('#idea-rows .price')].map(
      (node) => node.textContent,
    );
    expect(prices).toHaveLength(8);
    expect(new Set(prices)).toEqual(new Set(['0.5000']));
  });

  it('rows carry the seq their prices were valid at', async () => {
    const { app } = await startApp('multi');
    cleanup = app;
    for (const row of document.querySelectorAll<HTMLElement>('#idea-rows tr')) {
      expect(row.dataset.seq).toBe('1');
    }
  });

  it('a multi trade re-renders exactly one idea row', async () => {
    const { app, service } = await startApp('multi');
    cleanup = app;
    const before = rowNodes();
    service.pushFrame(
      frame(2, {
        type: 'trade',
        venue_id: 'main',
        changed_contracts: [
          { idea_id: 'idea-03', side: 'top', price: '0.5046' },
          { idea_id: 'idea-03', side: 'flop', price: '0.4954' },
        ],
      }),
    );
    await flush();
    const after = rowNodes();
    const replaced = [...before.keys()].filter((id) => before.get(id) !== after.get(id));
    expect(replaced).toEqual(['idea-03']);
    const row = after.get('idea-03') as HTMLElement;
    expect(row.querySelector('[data-side="top"]')!.textContent).toBe('0.5046');
    expect(row.querySelector('[data-side="flop"]')!.textContent).toBe('0.4954');
    expect(row.dataset.seq).toBe('2');
  });

  it('a single-design trade re-renders every row', async () => {
    const { app, service } = await startApp('single');
    cleanup = app;
    const before = rowNodes();
    service.pushFrame(
      frame(2, {
        type: 'trade',
        venue_id: 'main',
        changed_contracts: [
          { idea_id: 'idea-01', side: 'idea', price: '0.2702' },
          { idea_id: 'idea-02', side: 'idea', price: '0.2433' },
          { idea_id: 'idea-03', side: 'idea', price: '0.2433' },
          { idea_id: 'idea-04', side: 'idea', price: '0.2433' },
        ],
      }),
    );
    await flush();
    const after = rowNodes();
    const replaced = [...before.keys()].filter((id) => before.get(id) !== after.get(id));
    expect(replaced).toHaveLength(4);
    expect(after.get('idea-01')!.querySelector('.price')!.textContent).toBe('0.2702');
  });

  it('duplicate seq messages change nothing', async () => {
    const { app, service } = await startApp('multi');
    cleanup = app;
    const msg = {
      type: 'trade',
      venue_id: 'main',
      changed_contracts: [{ idea_id: 'idea-01', side: 'top', price: '0.7000' }],
    };
    service.pushFrame(frame(2, msg));
    await flush();
    const nodes = rowNodes();
    service.pushFrame(frame(2, { ...msg, changed_contracts: [{ idea_id: 'idea-01', side: 'top', price: '0.9999' }] }));
    await flush();
    expect(rowNodes().get('idea-01')).toBe(nodes.get('idea-01'));
  });

  it('settled message disables all trading controls', async () => {
    const { app, service } = await startApp('multi');
    cleanup = app;
    await register(app);
    service.pushFrame(frame(5, { type: 'settled', venue_id: 'main' }));
    await flush();
    const buttons = [...document.querySelectorAll<HTMLButtonElement>('#idea-rows button')];
    expect(buttons.length).toBeGreaterThan(0);
    expect(buttons.every((b) => b.disabled)).toBe(true);
  });
});

describe('order ticket', () => {
  it('quotes before confirming and shows the cost to 2 decimals', async () => {
    const { app, service } = await startApp('multi');
    cleanup = app;
    await register(app);
    service.state.quote = {
      cash_delta: 5.022809902497329,
      prices_after: [
        { idea_id: 'idea-01', side: 'top', price: '0.5046' },
        { idea_id: 'idea-01', side: 'flop', price: '0.4954' },
      ],
    };
    app.openTicket('idea-01', 'top', 'buy');
    const confirm = document.getElementById('ticket-confirm') as HTMLButtonElement;
    expect(confirm.disabled).toBe(true); // no quote yet
    await app.quoteDraft();
    expect(document.getElementById('ticket-cost')!.textContent).toBe('cost 5.02');
    const quoted = [...document.querySelectorAll('#ticket-prices .price')].map(
      (n) => n.textContent,
    );
    expect(quoted).toEqual(['0.5046', '0.4954']);
    expect(confirm.disabled).toBe(false);
  });

  it('quantity below 1 disables quoting and confirming', async () => {
    const { app } = await startApp('multi');
    cleanup = app;
    await register(app);
    app.openTicket('idea-01', 'top', 'buy');
    const qty = document.getElementById('ticket-quantity') as HTMLInputElement;
    qty.value = '0';
    qty.dispatchEvent(new Event('input'));
    expect((document.getElementById('ticket-quote') as HTMLButtonElement).disabled).toBe(true);
    expect((document.getElementById('ticket-confirm') as HTMLButtonElement).disabled).toBe(true);
  });

  it('confirmed fill shows the server new_cash exactly', async () => {
    const { app, service } = await startApp('multi');
    cleanup = app;
    await register(app);
    service.state.quote = { cash_delta: 5.0228, prices_after: [] };
    service.state.fill = {
      seq: 3,
      cash_delta: 5.0228,
      new_cash: 4994.9772,
      prices_after: [{ idea_id: 'idea-01', side: 'top', price: '0.5046' }],
    };
    service.state.portfolio = {
      trader_id: 'trader-001',
      cash: 4994.9772,
      holdings: [{ idea_id: 'idea-01', side: 'top', quantity: 10 }],
      transaction_count: 1,
      value_series: [
        { seq: 2, ts: 1.0, value: 5000.0 },
        { seq: 3, ts: 2.0, value: 5045.4372 },
      ],
    };
    app.openTicket('idea-01', 'top', 'buy');
    await app.quoteDraft();
    await app.confirmDraft();
    await flush();
    expect(document.getElementById('cash-amount')!.textContent).toBe('4994.9772');
    expect(app.vm.cash).toBe(4994.9772);
    const chart = document.getElementById('value-chart') as HTMLElement;
    expect(chart.dataset.samples).toBe('2');
    expect(chart.dataset.lastValue).toBe('5045.4372'); // portfolio endpoint value
  });

  it('renders a shortfall inline without any state change', async () => {
    const { app, service } = await startApp('multi');
    cleanup = app;
    await register(app);
    service.state.quote = { cash_delta: 5100.0, prices_after: [] };
    service.state.fill = {
      status: 409,
      body: {
        error: 'insufficient_cash',
        message: 'order cost exceeds available cash',
        required: 5100.0,
        available: 5000.0,
      },
    };
    app.openTicket('idea-01', 'top', 'buy');
    await app.quoteDraft();
    const cashBefore = app.vm.cash;
    await app.confirmDraft();
    const error = document.getElementById('ticket-error') as HTMLElement;
    expect(error.hidden).toBe(false);
    expect(error.textContent).toContain('5100');
    expect(error.textContent).toContain('5000');
    expect(app.vm.cash).toBe(cashBefore);
    expect(app.vm.transactionCount).toBe(0);
  });
});

describe('request discipline', () => {
  it('issues no mutating request other than register and place_order', async () => {
    const { app, service } = await startApp('multi');
    cleanup = app;
    await register(app);
    service.state.quote = { cash_delta: 1.0, prices_after: [] };
    service.state.fill = { seq: 3, cash_delta: 1.0, new_cash: 4999.0, prices_after: [] };
    app.openTicket('idea-01', 'top', 'buy');
    await app.quoteDraft();
    await app.confirmDraft();
    await app.showTab('portfolio');
    await app.showTab('faq');
    await flush();
    const mutating = service.requests.filter((r) => r.method !== 'GET');
    const allowed = new Set(['/register', '/venues/main/orders', '/venues/main/quote']);
    expect(mutating.every((r) => allowed.has(r.path))).toBe(true);
    // and quote is a preview, not a state change: the fake never mutates on it
  });
});

describe('connection badge', () => {
  it('flags the chart stale when the stream drops', async () => {
    const { app } = await startApp('multi');
    cleanup = app;
    await register(app);
    await flush(30); // stream live
    expect(document.getElementById('chart-stale-badge')!.hidden).toBe(true);
    app.stream!.retryDelayMs = 10_000; // hold the stale state while asserting
    app.stream!.dropConnection();
    await flush(30);
    expect(document.getElementById('connection-badge')!.dataset.status).toBe('stale');
    expect(document.getElementById('chart-stale-badge')!.hidden).toBe(false);
  });
});
