import { ArticleRecord, DayResult, EmbedderConfig, Manifest, ModelSnapshot } from "./types.js";
import { stubEmbedding } from "./stub.js";
import { DayRecord } from "./format.js";

const MS_PER_DAY = 86_400_000;

/**
 * Pick the newest model snapshot whose knowledge cutoff precedes the article
 * date by at least one year. Without such a snapshot the day must not be
 * embedded at all: a fresher model could leak post-publication knowledge
 * into the vector.
 */
export function selectModel(day: string, models: ModelSnapshot[]): ModelSnapshot | null {
  const limit = Date.parse(day) - 365 * MS_PER_DAY;
  let best: ModelSnapshot | null = null;
  for (const m of models) {
    const cut = Date.parse(m.cutoff);
    if (Number.isNaN(cut) || cut > limit) continue;
    if (best === null || cut > Date.parse(best.cutoff)) best = m;
  }
  return best;
}

/** Concatenate a day's titles and bodies, keeping the earliest text on overflow. */
export function dayText(articles: ArticleRecord[], maxChars: number): string {
  const parts: string[] = [];
  let used = 0;
  for (const a of articles) {
    const chunk = `${a.title}\n${a.body}`.trim();
    if (used + chunk.length > maxChars) {
      parts.push(chunk.slice(0, Math.max(0, maxChars - used)));
      break;
    }
    parts.push(chunk);
    used += chunk.length + 2;
  }
  return parts.join("\n\n");
}

async function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function requestEmbedding(
  text: string,
  model: string,
  cfg: EmbedderConfig,
): Promise<number[]> {
  if (!cfg.endpointUrl) throw new Error("endpoint mode requires an endpoint URL");
  const headers: Record<string, string> = { "content-type": "application/json" };
  const key = process.env.M2VN_EMBED_API_KEY;
  if (key) headers.authorization = `Bearer ${key}`;
  let lastError: unknown = null;
  for (let attempt = 0; attempt <= cfg.retries; attempt++) {
    if (attempt > 0) await sleep(cfg.retryBaseMs * 2 ** (attempt - 1));
    try {
      const res = await fetch(cfg.endpointUrl, {
        method: "POST",
        headers,
        body: JSON.stringify({ model, input: [text], dimensions: cfg.dim }),
      });
      if (!res.ok) {
        lastError = new Error(`HTTP ${res.status}`);
        continue;
      }
      const payload = (await res.json()) as { data?: Array<{ embedding?: number[] }> };
      const vec = payload.data?.[0]?.embedding;
      if (!Array.isArray(vec) || vec.length !== cfg.dim) {
        throw new Error(`endpoint returned ${vec?.length ?? 0} dims, expected ${cfg.dim}`);
      }
      return vec;
    } catch (err) {
      lastError = err;
    }
  }
  throw lastError instanceof Error ? lastError : new Error(String(lastError));
}

export async function embedDay(
  day: string,
  articles: ArticleRecord[],
  cfg: EmbedderConfig,
): Promise<DayResult> {
  if (articles.length === 0) {
    return {
      date: day,
      status: "empty",
      articleCount: 0,
      embedding: new Array<number>(cfg.dim).fill(0),
    };
  }
  const text = dayText(articles, cfg.maxChars);
  if (cfg.mode === "stub") {
    return {
      date: day,
      status: "ok",
      articleCount: articles.length,
      embedding: stubEmbedding(text, cfg.seed, cfg.dim),
    };
  }
  const model = selectModel(day, cfg.models);
  if (model === null) {
    return {
      date: day,
      status: "cutoff_violation",
      articleCount: articles.length,
      embedding: null,
      error: "no model snapshot with cutoff at least one year before the article date",
    };
  }
  try {
    const vec = await requestEmbedding(text, model.id, cfg);
    return {
      date: day,
      status: "ok",
      articleCount: articles.length,
      embedding: vec,
      model: model.id,
      cutoff: model.cutoff,
    };
  } catch (err) {
    return {
      date: day,
      status: "failed",
      articleCount: articles.length,
      embedding: null,
      model: model.id,
      cutoff: model.cutoff,
      error: err instanceof Error ? err.message : String(err),
    };
  }
}

/** Embed every day with bounded concurrency; output assembly stays single-threaded. */
export async function runBatch(
  byDay: Map<string, ArticleRecord[]>,
  cfg: EmbedderConfig,
): Promise<{ records: DayRecord[]; manifest: Manifest; failures: number }> {
  const days = [...byDay.keys()].sort();
  const results = new Array<DayResult>(days.length);
  let cursor = 0;
  const workers = Array.from({ length: Math.max(1, cfg.concurrency) }, async () => {
    while (true) {
      const mine = cursor++;
      if (mine >= days.length) return;
      const day = days[mine];
      results[mine] = await embedDay(day, byDay.get(day) ?? [], cfg);
    }
  });
  await Promise.all(workers);

  const records: DayRecord[] = [];
  const manifest: Manifest = { mode: cfg.mode, dim: cfg.dim, seed: cfg.seed, days: [] };
  let failures = 0;
  for (const r of results) {
    manifest.days.push({
      date: r.date,
      status: r.status,
      articleCount: r.articleCount,
      model: r.model,
      cutoff: r.cutoff,
      error: r.error,
    });
    if (r.status === "ok" || r.status === "empty") {
      records.push({
        date: r.date,
        count: r.status === "empty" ? 0 : r.articleCount,
        values: r.embedding as number[],
      });
    } else {
      failures += 1;
    }
  }
  return { records, manifest, failures };
}
