import { readFileSync, readdirSync, statSync } from "node:fs";
import { join } from "node:path";

import { ArticleRecord } from "./types.js";

/**
 * Loader for per-day article CSVs in the FNSPID layout. Header names are
 * matched case-insensitively with the common aliases (Date, Article_title,
 * Stock_symbol, Article). Rows missing a parseable date or a nonempty title
 * are rejected with their location.
 */

const DATE_KEYS = ["date"];
const TICKER_KEYS = ["ticker", "stock_symbol", "symbol"];
const TITLE_KEYS = ["title", "article_title", "headline"];
const BODY_KEYS = ["body", "article", "text", "content", "lsa_summary"];

function splitCsvLine(line: string): string[] {
  const out: string[] = [];
  let field = "";
  let quoted = false;
  for (let i = 0; i < line.length; i++) {
    const ch = line[i];
    if (quoted) {
      if (ch === '"') {
        if (line[i + 1] === '"') {
          field += '"';
          i += 1;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch === '"') {
      quoted = true;
    } else if (ch === ",") {
      out.push(field);
      field = "";
    } else {
      field += ch;
    }
  }
  out.push(field);
  return out;
}

function findColumn(header: string[], aliases: string[]): number {
  const lowered = header.map((h) => h.trim().toLowerCase());
  for (const name of aliases) {
    const idx = lowered.indexOf(name);
    if (idx >= 0) return idx;
  }
  return -1;
}

export function parseArticlesCsv(text: string, origin: string): ArticleRecord[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) return [];
  const header = splitCsvLine(lines[0]);
  const dateCol = findColumn(header, DATE_KEYS);
  const titleCol = findColumn(header, TITLE_KEYS);
  if (dateCol < 0 || titleCol < 0) {
    throw new Error(`${origin}: header must include a date and a title column`);
  }
  const tickerCol = findColumn(header, TICKER_KEYS);
  const bodyCol = findColumn(header, BODY_KEYS);
  const out: ArticleRecord[] = [];
  for (let i = 1; i < lines.length; i++) {
    const cells = splitCsvLine(lines[i]);
    const rawDate = (cells[dateCol] ?? "").trim();
    const day = rawDate.slice(0, 10);
    if (!/^\d{4}-\d{2}-\d{2}$/.test(day) || Number.isNaN(Date.parse(day))) {
      throw new Error(`${origin}:${i + 1}: unparseable date ${rawDate!}`);
    }
    const title = (cells[titleCol] ?? "").trim();
    if (!title) {
      throw new Error(`${origin}:${i + 1}: empty title`);
    }
    out.push({
      date: day,
      ticker: tickerCol >= 0 ? (cells[tickerCol] ?? "").trim() : "",
      title,
      body: bodyCol >= 0 ? (cells[bodyCol] ?? "").trim() : "",
    });
  }
  return out;
}

export function loadArticles(inputDir: string): ArticleRecord[] {
  const files = readdirSync(inputDir)
    .filter((f) => f.toLowerCase().endsWith(".csv"))
    .sort();
  if (files.length === 0) {
    throw new Error(`${inputDir}: no .csv article files found`);
  }
  const all: ArticleRecord[] = [];
  for (const f of files) {
    const path = join(inputDir, f);
    if (!statSync(path).isFile()) continue;
    all.push(...parseArticlesCsv(readFileSync(path, "utf8"), f));
  }
  return all;
}

/** Group articles per calendar day, each day's list in a stable text order. */
export function groupByDay(articles: ArticleRecord[]): Map<string, ArticleRecord[]> {
  const byDay = new Map<string, ArticleRecord[]>();
  for (const a of articles) {
    const list = byDay.get(a.date) ?? [];
    list.push(a);
    byDay.set(a.date, list);
  }
  for (const list of byDay.values()) {
    list.sort((x, y) => (x.ticker + x.title).localeCompare(y.ticker + y.title));
  }
  return byDay;
}
