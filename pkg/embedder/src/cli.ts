#!/usr/bin/env node
import { writeFileSync } from "node:fs";

import { groupByDay, loadArticles } from "./fnspid.js";
import { renderEmbeddingFile } from "./format.js";
import { runBatch } from "./embed.js";
import { EmbedderConfig, ModelSnapshot, defaultConfig } from "./types.js";

const USAGE = `m2vn-embed --input <dir> --mode stub|endpoint --dim <d> --out <file>
            [--seed <n>] [--manifest <file>] [--endpoint-url <url>]
            [--model <id=cutoff-date>]... [--concurrency <n>] [--max-chars <n>]

Converts per-day news article CSVs into the daily embedding file format.
Endpoint credentials are read from M2VN_EMBED_API_KEY.`;

interface CliArgs {
  input: string;
  out: string;
  manifest: string | null;
  cfg: EmbedderConfig;
}

export function parseArgs(argv: string[]): CliArgs {
  const cfg = defaultConfig();
  let input: string | null = null;
  let out: string | null = null;
  let manifest: string | null = null;
  const models: ModelSnapshot[] = [];

  const next = (i: number, flag: string): string => {
    if (i + 1 >= argv.length) throw new Error(`${flag} needs a value`);
    return argv[i + 1];
  };
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    switch (flag) {
      case "--input":
        input = next(i, flag);
        break;
      case "--out":
        out = next(i, flag);
        break;
      case "--manifest":
        manifest = next(i, flag);
        break;
      case "--mode": {
        const mode = next(i, flag);
        if (mode !== "stub" && mode !== "endpoint") throw new Error(`unknown mode ${mode}`);
        cfg.mode = mode;
        break;
      }
      case "--dim":
        cfg.dim = Number.parseInt(next(i, flag), 10);
        break;
      case "--seed":
        cfg.seed = Number.parseInt(next(i, flag), 10);
        break;
      case "--endpoint-url":
        cfg.endpointUrl = next(i, flag);
        break;
      case "--model": {
        const spec = next(i, flag);
        const eq = spec.indexOf("=");
        if (eq <= 0) throw new Error(`--model expects id=cutoff-date, got ${spec}`);
        models.push({ id: spec.slice(0, eq), cutoff: spec.slice(eq + 1) });
        break;
      }
      case "--batch-size":
        cfg.batchSize = Number.parseInt(next(i, flag), 10);
        break;
      case "--concurrency":
        cfg.concurrency = Number.parseInt(next(i, flag), 10);
        break;
      case "--max-chars":
        cfg.maxChars = Number.parseInt(next(i, flag), 10);
        break;
      case "--help":
      case "-h":
        console.log(USAGE);
        process.exit(0);
        break;
      default:
        throw new Error(`unknown flag ${flag}`);
    }
  }
  if (!input || !out) throw new Error("--input and --out are required");
  if (!Number.isFinite(cfg.dim) || cfg.dim <= 0) throw new Error("--dim must be positive");
  if (cfg.mode === "endpoint" && !cfg.endpointUrl) {
    throw new Error("endpoint mode requires --endpoint-url");
  }
  if (cfg.mode === "endpoint" && models.length === 0) {
    throw new Error("endpoint mode requires at least one --model id=cutoff");
  }
  cfg.models = models;
  return { input, out, manifest, cfg };
}

export async function main(argv: string[]): Promise<number> {
  let args: CliArgs;
  try {
    args = parseArgs(argv);
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    console.error(USAGE);
    return 2;
  }
  const articles = loadArticles(args.input);
  const byDay = groupByDay(articles);
  const { records, manifest, failures } = await runBatch(byDay, args.cfg);
  writeFileSync(args.out, renderEmbeddingFile(records, args.cfg.dim));
  if (args.manifest) {
    writeFileSync(args.manifest, JSON.stringify(manifest, null, 2) + "\n");
  }
  const okDays = manifest.days.length - failures;
  console.log(
    `embedded ${okDays}/${manifest.days.length} day(s) ` +
    `(${articles.length} articles, mode=${args.cfg.mode}, dim=${args.cfg.dim}) -> ${args.out}`,
  );
  if (failures > 0) {
    console.error(`${failures} day(s) failed or violated the cutoff policy`);
    return 1;
  }
  return 0;
}

const invokedDirectly = process.argv[1] && import.meta.url.endsWith(
  process.argv[1].split("/").pop() as string,
);
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
