// Pure view-model state and reducers. No DOM, no network: every function
// takes a model and returns the next one, so behaviour is directly testable.
//
// Price strings from the server are stored and displayed verbatim; floats
// enter only the portfolio-value chart, never a rendered price.

import type {
  FillResult,
  Holding,
  IdeaRow,
  Portfolio,
  SeriesPoint,
  VenueSummary,
} from './api.js';
import type { StreamMessage, StreamStatus } from './stream.js';

export const CONTRACT_PAYOFF = 100;

export interface IdeaView {
  idea_id: string;
  title: string;
  description: string;
  stratum: string;
  prices: Record<string, string>;
  seq: number; // the log seq these prices were valid at
}

export interface ViewModel {
  venue: VenueSummary | null;
  ideas: IdeaView[];
  lastSeq: number;
  settled: boolean;
  connection: StreamStatus;
  traderId: string | null;
  cash: number | null;
  holdings: Holding[];
  transactionCount: number;
  series: SeriesPoint[];
}

export function initialModel(): ViewModel {
  return {
    venue: null,
    ideas: [],
    lastSeq: 0,
    settled: false,
    connection: 'connecting',
    traderId: null,
    cash: null,
    holdings: [],
    transactionCount: 0,
    series: [],
  };
}

export function loadVenue(vm: ViewModel, venue: VenueSummary, ideas: IdeaRow[]): ViewModel {
  return {
    ...vm,
    venue,
    settled: venue.status === 'settled',
    lastSeq: venue.seq,
    ideas: ideas.map((idea) => ({ ...idea, prices: { ...idea.prices }, seq: venue.seq })),
  };
}

export interface TradeApplication {
  vm: ViewModel;
  changedIdeas: string[];
}

// Fold one stream message in. Stale or duplicate messages (seq at or below
// what the model reflects) change nothing.
export function applyMessage(vm: ViewModel, message: StreamMessage): TradeApplication {
  if (message.seq <= vm.lastSeq && message.type !== 'settled') {
    return { vm, changedIdeas: [] };
  }
  if (message.type === 'settled') {
    return { vm: { ...vm, settled: true, lastSeq: Math.max(vm.lastSeq, message.seq) }, changedIdeas: [] };
  }
  const updates = new Map<string, Record<string, string>>();
  for (const row of message.changed_contracts) {
    const sides = updates.get(row.idea_id) ?? {};
    sides[row.side] = row.price;
    updates.set(row.idea_id, sides);
  }
  const ideas = vm.ideas.map((idea) => {
    const sides = updates.get(idea.idea_id);
    if (sides === undefined) return idea;
    return { ...idea, prices: { ...idea.prices, ...sides }, seq: message.seq };
  });
  const next = { ...vm, ideas, lastSeq: message.seq };
  return { vm: next, changedIdeas: [...updates.keys()] };
}

export function applyRegistration(vm: ViewModel, traderId: string, cash: number): ViewModel {
  return { ...vm, traderId, cash };
}

// Authoritative portfolio state straight from the server; the local series
// is replaced wholesale so chart points agree with the ledger's valuation.
export function applyPortfolio(vm: ViewModel, portfolio: Portfolio): ViewModel {
  return {
    ...vm,
    traderId: portfolio.trader_id,
    cash: portfolio.cash,
    holdings: portfolio.holdings.map((h) => ({ ...h })),
    transactionCount: portfolio.transaction_count,
    series: portfolio.value_series.map((p) => ({ ...p })),
  };
}

// A confirmed fill updates cash to the server's figure exactly; holdings
// adjust locally pending the next portfolio fetch.
export function applyFill(
  vm: ViewModel,
  order: { idea_id: string; side: string; direction: string; quantity: number },
  fill: FillResult,
): ViewModel {
  const delta = order.direction === 'buy' ? order.quantity : -order.quantity;
  const holdings = vm.holdings.map((h) => ({ ...h }));
  const existing = holdings.find((h) => h.idea_id === order.idea_id && h.side === order.side);
  if (existing !== undefined) existing.quantity += delta;
  else holdings.push({ idea_id: order.idea_id, side: order.side, quantity: delta });
  return {
    ...vm,
    cash: fill.new_cash,
    holdings: holdings.filter((h) => h.quantity !== 0),
    transactionCount: vm.transactionCount + 1,
  };
}

// Mark-to-market value of the account at the model's current prices.
export function markValue(vm: ViewModel): number | null {
  if (vm.cash === null) return null;
  let value = vm.cash;
  const byIdea = new Map(vm.ideas.map((idea) => [idea.idea_id, idea.prices]));
  for (const holding of vm.holdings) {
    const prices = byIdea.get(holding.idea_id);
    const price = prices?.[holding.side];
    if (price !== undefined) value += holding.quantity * Number(price) * CONTRACT_PAYOFF;
  }
  return value;
}

// Chart sampling: one point per received price update (and the portfolio
// refetch after an own trade replaces the series with server truth).
export function sampleSeries(vm: ViewModel): ViewModel {
  const value = markValue(vm);
  if (value === null) return vm;
  const last = vm.series[vm.series.length - 1];
  if (last !== undefined && last.seq === vm.lastSeq) return vm;
  const point = { seq: vm.lastSeq, ts: Date.now() / 1000, value };
  return { ...vm, series: [...vm.series, point] };
}

export function setConnection(vm: ViewModel, status: StreamStatus): ViewModel {
  return vm.connection === status ? vm : { ...vm, connection: status };
}

// Sides a row offers trading controls for, by venue design.
export function sidesFor(vm: ViewModel): string[] {
  return vm.venue?.design === 'single' ? ['idea'] : ['top', 'flop'];
}
