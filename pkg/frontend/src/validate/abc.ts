/** Client-side twin of the server's ABC validator.
 *
 * Walks the text with the same rules the backend applies, so the editor
 * can refuse a save the server would bounce and can pin messages to the
 * same line:column positions.  Only diagnostics are produced here — the
 * actual score model stays server-side.
 */

import type { Diagnostic } from "../api/types.js";

const REQUIRED_HEADERS = ["X", "M", "L", "K"] as const;
const KNOWN_HEADERS = new Set(["X", "T", "M", "L", "Q", "K", "V"]);

const NATURAL_PC: Record<string, number> = { C: 0, D: 2, E: 4, F: 5, G: 7, A: 9, B: 11 };
const SHARP_ORDER = "FCGDAEB";
const FLAT_ORDER = "BEADGCF";

/** Major keys by signature; negative counts flats. */
const KEY_FIFTHS: Record<string, number> = {
  C: 0, G: 1, D: 2, A: 3, E: 4, B: 5, "F#": 6, "C#": 7,
  F: -1, BB: -2, EB: -3, AB: -4, DB: -5, GB: -6, CB: -7,
};
const MINOR_SHIFT = -3;

function error(message: string, line?: number, column?: number): Diagnostic {
  return { severity: "error", message, line, column };
}

function warning(message: string, line?: number, column?: number): Diagnostic {
  return { severity: "warning", message, line, column };
}

/** Accidental per letter for a key name like C, Gm, Bb, F#min; null if unknown. */
function keySignature(key: string): Record<string, number> | null {
  let k = key.trim().replaceAll(" ", "");
  if (!k) {
    return null;
  }
  let minor = false;
  for (const suffix of ["MIN", "MINOR", "M"]) {
    if (k.toUpperCase().endsWith(suffix) && k.length > suffix.length) {
      if (suffix === "M" && (k.toUpperCase().endsWith("MAJ") || k.toUpperCase().endsWith("MAJOR"))) {
        break;
      }
      minor = true;
      k = k.slice(0, -suffix.length);
      break;
    }
  }
  for (const suffix of ["MAJ", "MAJOR"]) {
    if (k.toUpperCase().endsWith(suffix) && k.length > suffix.length) {
      k = k.slice(0, -suffix.length);
      break;
    }
  }
  const name = k.toUpperCase();
  const fifthsBase = KEY_FIFTHS[name];
  if (fifthsBase === undefined) {
    return null;
  }
  const fifths = fifthsBase + (minor ? MINOR_SHIFT : 0);
  const sig: Record<string, number> = { C: 0, D: 2, E: 4, F: 5, G: 7, A: 9, B: 11 };
  for (const letter of Object.keys(sig)) {
    sig[letter] = 0;
  }
  if (fifths > 0) {
    for (const letter of SHARP_ORDER.slice(0, fifths)) {
      sig[letter] = 1;
    }
  } else if (fifths < 0) {
    for (const letter of FLAT_ORDER.slice(0, -fifths)) {
      sig[letter] = -1;
    }
  }
  return sig;
}

/** Fraction text as Python's Fraction() accepts it: int, a/b, or decimal. */
function parseFractionText(value: string): { ok: boolean; value: number } {
  const v = value.trim();
  const asRatio = /^([+-]?\d+)\/(\d+)$/.exec(v);
  if (asRatio) {
    const den = Number(asRatio[2]);
    if (den === 0) {
      return { ok: false, value: 0 };
    }
    return { ok: true, value: Number(asRatio[1]) / den };
  }
  if (/^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$/.test(v)) {
    return { ok: true, value: Number(v) };
  }
  return { ok: false, value: 0 };
}

function meterIsValid(value: string): boolean {
  const v = value.trim();
  if (v === "C" || v === "C|") {
    return true;
  }
  const parts = /^([+-]?\d+)\/([+-]?\d+)$/.exec(v);
  if (!parts) {
    return false;
  }
  return Number(parts[1]) > 0 && Number(parts[2]) > 0;
}

function tempoIsValid(value: string): boolean {
  const v = value.trim().replace(/^"+/, "").replace(/"+$/, "");
  if (v.includes("=")) {
    const eq = v.indexOf("=");
    const unit = parseFractionText(v.slice(0, eq));
    const rate = Number(v.slice(eq + 1).trim());
    return unit.ok && Number.isFinite(rate) && rate > 0 && unit.value > 0;
  }
  const bpm = Number(v);
  return v.trim() !== "" && Number.isFinite(bpm) && bpm > 0;
}

/** Length multiplier starting at i: digits, then /den groups (den default 2). */
function parseLength(
  line: string,
  i: number,
): { next: number; zeroDenominator: boolean } {
  let zeroDenominator = false;
  while (i < line.length && /\d/.test(line[i]!)) {
    i += 1;
  }
  while (i < line.length && line[i] === "/") {
    i += 1;
    let den = 0;
    let sawDigit = false;
    while (i < line.length && /\d/.test(line[i]!)) {
      den = den * 10 + Number(line[i]);
      sawDigit = true;
      i += 1;
    }
    if (sawDigit && den === 0) {
      zeroDenominator = true;
    }
  }
  return { next: i, zeroDenominator };
}

interface VoiceState {
  /** Accidentals announced earlier in the bar, keyed "letter,octave". */
  accidentals: Map<string, number>;
}

const NOTE_LETTERS = "ABCDEFGabcdefg";
const ACCIDENTAL_CHARS = "^_=";

function parseMusicLine(
  line: string,
  lineno: number,
  state: VoiceState,
  sig: Record<string, number>,
  sink: Diagnostic[],
): void {
  const n = line.length;
  let i = 0;

  /** Accidental+letter+octave+length at i; pitchOk false when the token failed. */
  const parseOneNote = (
    start: number,
    chord: boolean,
  ): { pitchOk: boolean; next: number } => {
    let j = start;
    const col = start + 1;
    let acc: number | null = null;
    if (ACCIDENTAL_CHARS.includes(line[j]!)) {
      if (line.startsWith("^^", j)) {
        acc = 2;
        j += 2;
      } else if (line.startsWith("__", j)) {
        acc = -2;
        j += 2;
      } else {
        acc = { "^": 1, _: -1, "=": 0 }[line[j]!]!;
        j += 1;
      }
    }
    if (j >= n || !NOTE_LETTERS.includes(line[j]!)) {
      sink.push(error("accidental not followed by a note letter", lineno, col));
      return { pitchOk: false, next: j };
    }
    const raw = line[j]!;
    let octave = raw === raw.toLowerCase() ? 5 : 4;
    const letter = raw.toUpperCase();
    j += 1;
    while (j < n && (line[j] === "," || line[j] === "'")) {
      octave += line[j] === "'" ? 1 : -1;
      j += 1;
    }
    const length = parseLength(line, j);
    j = length.next;
    if (length.zeroDenominator) {
      sink.push(error("note length has a zero denominator", lineno, col));
      return { pitchOk: false, next: j };
    }
    if (j < n && line[j] === "-" && !chord) {
      j += 1;
    }
    const key = `${letter},${octave}`;
    if (acc === null) {
      acc = state.accidentals.get(key) ?? sig[letter]!;
    } else {
      state.accidentals.set(key, acc);
    }
    const pitch = 12 * (octave + 1) + NATURAL_PC[letter]! + acc;
    if (pitch < 0 || pitch > 127) {
      sink.push(error(`pitch out of MIDI range: ${pitch}`, lineno, col));
      return { pitchOk: false, next: j };
    }
    return { pitchOk: true, next: j };
  };

  while (i < n) {
    const c = line[i]!;
    if (c === " " || c === "\t") {
      i += 1;
    } else if (c === "|" || c === ":") {
      while (i < n && "|:][1234567890".includes(line[i]!)) {
        if (line[i] === "[" && i + 1 < n && !"|]1234567890".includes(line[i + 1]!)) {
          break;
        }
        i += 1;
      }
      state.accidentals.clear();
    } else if (c === "z" || c === "x" || c === "Z") {
      i += 1;
      const rest = parseLength(line, i);
      if (rest.zeroDenominator) {
        sink.push(error("rest length has a zero denominator", lineno, i));
      }
      i = rest.next;
    } else if (c === "[") {
      if (i + 1 < n && line[i + 1] === "|") {
        i += 2;
        state.accidentals.clear();
        continue;
      }
      i += 1;
      while (i < n && line[i] !== "]") {
        if (line[i] === " " || line[i] === "\t") {
          i += 1;
          continue;
        }
        const note = parseOneNote(i, true);
        if (!note.pitchOk) {
          i = note.next === i ? note.next + 1 : note.next;
          if (i >= n) {
            break;
          }
          continue;
        }
        i = note.next;
      }
      if (i >= n) {
        sink.push(error("unterminated chord", lineno, n));
      } else {
        i += 1;
      }
      const mult = parseLength(line, i);
      if (mult.zeroDenominator) {
        sink.push(error("chord length has a zero denominator", lineno, i));
      }
      i = mult.next;
      if (i < n && line[i] === "-") {
        i += 1;
      }
    } else if (ACCIDENTAL_CHARS.includes(c) || NOTE_LETTERS.includes(c)) {
      const note = parseOneNote(i, false);
      i = note === null ? i + 1 : note.next;
    } else {
      sink.push(error(`unexpected character ${JSON.stringify(c)}`, lineno, i + 1));
      i += 1;
    }
  }
}

/** Diagnose ABC text with the backend's rules; no errors means it will save. */
export function validateAbc(text: string): Diagnostic[] {
  const sink: Diagnostic[] = [];
  const bytes = new TextEncoder().encode(text);
  for (let offset = 0; offset < bytes.length; offset += 1) {
    const byte = bytes[offset]!;
    if (byte > 127) {
      const hex = byte.toString(16).padStart(2, "0");
      return [error(`non-ASCII byte 0x${hex} at byte offset ${offset}`)];
    }
  }

  const headers = new Map<string, string>();
  const voices = new Map<string, VoiceState>();
  let current: VoiceState | null = null;
  let sig = keySignature("C")!;
  let inBody = false;

  const voice = (vid: string): VoiceState => {
    let state = voices.get(vid);
    if (state === undefined) {
      state = { accidentals: new Map() };
      voices.set(vid, state);
    }
    return state;
  };

  const lines = text.split("\n");
  for (let index = 0; index < lines.length; index += 1) {
    const lineno = index + 1;
    const line = lines[index]!.split("%")[0]!.trimEnd();
    if (!line.trim()) {
      continue;
    }
    if (line.length >= 2 && line[1] === ":" && /[A-Za-z]/.test(line[0]!)) {
      const field = line[0]!;
      const value = line.slice(2).trim();
      if (field === "w") {
        sink.push(warning("lyrics line ignored", lineno, 1));
        continue;
      }
      if (field === "V") {
        const parts = value.split(/\s+/).filter(Boolean);
        current = voice(parts[0] ?? value);
        inBody = inBody || headers.has("K");
        continue;
      }
      if (!KNOWN_HEADERS.has(field)) {
        sink.push(warning(`unknown header ${field}:`, lineno, 1));
        continue;
      }
      if (!headers.has(field)) {
        headers.set(field, value);
      }
      if (field === "L") {
        const unit = parseFractionText(value);
        if (!unit.ok) {
          sink.push(error(`bad unit length ${JSON.stringify(value)}`, lineno, 3));
        }
      } else if (field === "M" && !meterIsValid(value)) {
        sink.push(error(`bad meter ${JSON.stringify(value)}`, lineno, 3));
      } else if (field === "Q" && !tempoIsValid(value)) {
        sink.push(error(`bad tempo ${JSON.stringify(value)}`, lineno, 3));
      } else if (field === "K") {
        const ks = keySignature(value);
        if (ks === null) {
          sink.push(error(`unknown key ${JSON.stringify(value)}`, lineno, 3));
        } else {
          sig = ks;
        }
        inBody = true;
      }
      continue;
    }
    if (!inBody) {
      sink.push(error("music line before K: header", lineno, 1));
      continue;
    }
    if (current === null) {
      current = voice("1");
    }
    parseMusicLine(line, lineno, current, sig, sink);
  }

  for (const field of REQUIRED_HEADERS) {
    if (!headers.has(field)) {
      sink.push(error(`missing required header ${field}:`));
    }
  }
  return sink;
}
