// Example external translation backend for the file-exchange protocol:
//   node dist/main.js <in.pgm> <out.pgm>
// Reads a binary PGM (P5, maxval 255), replaces every nonzero pixel with
// the rounded mean of its nonzero 3x3 neighbours (zeros stay zero, so the
// lung support is preserved), writes the result with identical dimensions,
// and exits 0. Any problem with the input exits 2 with a message on stderr.

import { readFileSync, writeFileSync } from "node:fs";

interface Pgm {
  width: number;
  height: number;
  pixels: Buffer;
}

function fail(message: string): never {
  process.stderr.write(`pgm-smooth-backend: ${message}\n`);
  process.exit(2);
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d || byte === 0x0b || byte === 0x0c;
}

function parsePgm(buf: Buffer): Pgm {
  if (buf.length < 2 || buf.toString("latin1", 0, 2) !== "P5") {
    fail("input is not a binary PGM (P5)");
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < buf.length && isSpace(buf[pos])) pos++;
    const start = pos;
    while (pos < buf.length && !isSpace(buf[pos])) pos++;
    const token = buf.toString("latin1", start, pos);
    if (!/^\d+$/.test(token)) fail(`bad PGM header field '${token}'`);
    fields.push(parseInt(token, 10));
  }
  const [width, height, maxval] = fields;
  if (maxval !== 255) fail(`unsupported maxval ${maxval} (need 255)`);
  if (width < 1 || height < 1) fail(`bad dimensions ${width}x${height}`);
  pos++; // exactly one whitespace byte separates header and payload
  const pixels = buf.subarray(pos, pos + width * height);
  if (pixels.length !== width * height) fail("payload size does not match dimensions");
  return { width, height, pixels: Buffer.from(pixels) };
}

function smoothInterior({ width, height, pixels }: Pgm): Buffer {
  const out = Buffer.alloc(pixels.length);
  for (let r = 0; r < height; r++) {
    for (let c = 0; c < width; c++) {
      const idx = r * width + c;
      if (pixels[idx] === 0) continue;
      let sum = 0;
      let count = 0;
      for (let dr = -1; dr <= 1; dr++) {
        for (let dc = -1; dc <= 1; dc++) {
          const rr = r + dr;
          const cc = c + dc;
          if (rr < 0 || rr >= height || cc < 0 || cc >= width) continue;
          const value = pixels[rr * width + cc];
          if (value > 0) {
            sum += value;
            count++;
          }
        }
      }
      out[idx] = Math.round(sum / count);
    }
  }
  return out;
}

function main(argv: string[]): void {
  if (argv.length !== 2) fail("usage: main.js <in.pgm> <out.pgm>");
  const [inPath, outPath] = argv;
  let raw: Buffer;
  try {
    raw = readFileSync(inPath);
  } catch (err) {
    fail(`cannot read ${inPath}: ${(err as Error).message}`);
  }
  const pgm = parsePgm(raw);
  const smoothed = smoothInterior(pgm);
  const header = Buffer.from(`P5\n${pgm.width} ${pgm.height}\n255\n`, "latin1");
  writeFileSync(outPath, Buffer.concat([header, smoothed]));
}

main(process.argv.slice(2));
