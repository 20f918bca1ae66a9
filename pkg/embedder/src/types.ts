export interface ArticleRecord {
  date: string; // ISO calendar day
  ticker: string;
  title: string;
  body: string;
}

export interface ModelSnapshot {
  id: string;
  cutoff: string; // ISO date of the model's knowledge cutoff
}

export type EmbedderMode = "stub" | "endpoint";

export interface EmbedderConfig {
  mode: EmbedderMode;
  dim: number;
  seed: number;
  endpointUrl?: string;
  models: ModelSnapshot[];
  batchSize: number;
  concurrency: number;
  maxChars: number; // head-first truncation limit for a day's concatenated text
  retries: number;
  retryBaseMs: number;
}

export type DayStatus = "ok" | "empty" | "failed" | "cutoff_violation";

export interface DayResult {
  date: string;
  status: DayStatus;
  articleCount: number;
  embedding: number[] | null;
  model?: string;
  cutoff?: string;
  error?: string;
}

export interface Manifest {
  mode: EmbedderMode;
  dim: number;
  seed: number;
  days: Array<{
    date: string;
    status: DayStatus;
    articleCount: number;
    model?: string;
    cutoff?: string;
    error?: string;
  }>;
}

export const defaultConfig = (): EmbedderConfig => ({
  mode: "stub",
  dim: 768,
  seed: 0,
  models: [],
  batchSize: 16,
  concurrency: 4,
  maxChars: 20000,
  retries: 3,
  retryBaseMs: 250,
});
