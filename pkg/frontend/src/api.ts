// Typed client for the market service's JSON API.
//
// Prices arrive as fixed 4-decimal strings and are passed through verbatim:
// nothing in the UI ever reformats a price through a float. The only
// state-mutating calls the client offers are register and placeOrder (quote
// is a priced preview, it commits nothing).

export interface VenueSummary {
  venue_id: string;
  design: 'single' | 'multi';
  b: number;
  status: 'open' | 'settled';
  n_ideas: number;
  seq: number;
}

export interface PriceRow {
  idea_id: string;
  side: string;
  price: string;
}

export interface IdeaRow {
  idea_id: string;
  title: string;
  description: string;
  stratum: string;
  prices: Record<string, string>;
}

export interface PriceBook {
  venue_id: string;
  seq: number;
  prices: PriceRow[];
}

export interface RegisterResult {
  token: string;
  trader_id: string;
  cash: number;
}

export interface OrderRequest {
  idea_id: string;
  side: string;
  direction: 'buy' | 'sell';
  quantity: number;
}

export interface QuoteResult {
  cash_delta: number;
  prices_after: PriceRow[];
}

export interface FillResult {
  seq: number;
  cash_delta: number;
  new_cash: number;
  prices_after: PriceRow[];
}

export interface Holding {
  idea_id: string;
  side: string;
  quantity: number;
}

export interface SeriesPoint {
  seq: number;
  ts: number;
  value: number;
}

export interface Portfolio {
  trader_id: string;
  cash: number;
  holdings: Holding[];
  transaction_count: number;
  value_series: SeriesPoint[];
}

interface ErrorBody {
  error?: string;
  message?: string;
  [detail: string]: unknown;
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: ErrorBody;

  constructor(status: number, body: ErrorBody) {
    super(body.message ?? `request failed with status ${status}`);
    this.status = status;
    this.code = body.error ?? 'unknown_error';
    this.details = body;
  }
}

type FetchLike = typeof fetch;

export class MarketApi {
  readonly baseUrl: string;
  private token: string | null = null;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl: FetchLike = fetch) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
    this.fetchImpl = fetchImpl;
  }

  setToken(token: string | null): void {
    this.token = token;
  }

  get authenticated(): boolean {
    return this.token !== null;
  }

  private async request<T>(method: 'GET' | 'POST', path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers['content-type'] = 'application/json';
    if (this.token !== null) headers['authorization'] = `Bearer ${this.token}`;
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const text = await response.text();
    if (!response.ok) {
      let parsed: ErrorBody;
      try {
        parsed = JSON.parse(text) as ErrorBody;
      } catch {
        parsed = { message: text };
      }
      throw new ApiError(response.status, parsed);
    }
    return JSON.parse(text) as T;
  }

  async register(activationCode: string): Promise<RegisterResult> {
    const result = await this.request<RegisterResult>('POST', '/register', {
      activation_code: activationCode,
    });
    this.token = result.token;
    return result;
  }

  venues(): Promise<VenueSummary[]> {
    return this.request('GET', '/venues');
  }

  ideas(venueId: string): Promise<IdeaRow[]> {
    return this.request('GET', `/venues/${encodeURIComponent(venueId)}/ideas`);
  }

  prices(venueId: string): Promise<PriceBook> {
    return this.request('GET', `/venues/${encodeURIComponent(venueId)}/prices`);
  }

  quote(venueId: string, order: OrderRequest): Promise<QuoteResult> {
    return this.request('POST', `/venues/${encodeURIComponent(venueId)}/quote`, order);
  }

  placeOrder(venueId: string, order: OrderRequest): Promise<FillResult> {
    return this.request('POST', `/venues/${encodeURIComponent(venueId)}/orders`, order);
  }

  portfolio(): Promise<Portfolio> {
    return this.request('GET', '/portfolio');
  }

  async faq(): Promise<string> {
    const response = await this.fetchImpl(`${this.baseUrl}/faq`);
    if (!response.ok) throw new ApiError(response.status, { message: 'faq unavailable' });
    return response.text();
  }
}
