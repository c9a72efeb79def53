/** Wire types for the cinescore HTTP API, mirrored field-for-field. */

/** Pipeline stages in ladder order; later stages imply earlier ones. */
export const STAGES = [
  "Spotted",
  "Described",
  "Generated",
  "Assessed",
  "Arranged",
  "Rendered",
] as const;

export type Stage = (typeof STAGES)[number];

/** True when `stage` is at or beyond `required` on the ladder. */
export function stageAtLeast(stage: Stage, required: Stage): boolean {
  return STAGES.indexOf(stage) >= STAGES.indexOf(required);
}

export interface ClipView {
  source: string;
  frame_rate: number;
  duration: number;
}

export interface SpotsPayload {
  clip_duration: number;
  onsets: number[];
}

export interface NoteView {
  onset: number;
  duration: number;
  pitch: number;
  velocity: number;
}

export interface TrackView {
  index: number;
  name: string;
  notes: NoteView[];
}

export interface MelodyView {
  tracks: TrackView[];
}

export interface CriterionView {
  id: number;
  agent: string;
  verdict: boolean;
  rationale: string;
}

export interface ScorecardView {
  total: number;
  criteria: CriterionView[];
}

export type DynamicLevel = "forte" | "mezzo" | "piano";

export const DYNAMIC_LEVELS: readonly DynamicLevel[] = ["forte", "mezzo", "piano"];

/** A track plan as it appears inside serialized scheme JSON. */
export interface TrackPlanWire {
  source_track: number;
  duplicate: boolean;
  instrument: string;
  measure_dynamics: Record<string, DynamicLevel>;
  soften: number[];
  volume_envelope: [number, number][];
  pan: number;
  reverb_send: number;
}

export interface SchemeWire {
  version: number;
  global: {
    reverb_level: number;
    master_gain: number;
  };
  tracks: TrackPlanWire[];
}

export interface VisualReportView {
  [key: string]: unknown;
}

export interface ProjectView {
  id: string;
  clip: ClipView;
  stage: Stage;
  revision: number;
  description: string | null;
  spots: SpotsPayload | null;
  report: VisualReportView | null;
  melody: MelodyView | null;
  abc: string | null;
  scorecard: ScorecardView | null;
  scheme: SchemeWire | null;
  /** [revision, filename] pairs, oldest first. */
  renders: [number, string][];
}

export type JobStatus = "running" | "done" | "failed";

export interface JobView {
  id: string;
  kind: string;
  project_id: string;
  status: JobStatus;
  error: string | null;
  revision: number | null;
}

export interface InstrumentView {
  name: string;
  program: number;
  family: string;
  low: number;
  high: number;
}

export interface RegistryView {
  dynamics: DynamicLevel[];
  instruments: InstrumentView[];
}

export interface TranscriptTurnView {
  agent: string;
  prompt: string;
  response: string;
  timestamp: number;
}

export type TranscriptsView = Record<string, TranscriptTurnView[]>;

export interface EvaluationView {
  [metric: string]: number | string | null;
}

/** One problem found in an editable artifact, local or server-reported. */
export interface Diagnostic {
  severity: "error" | "warning";
  message: string;
  /** 1-based source line, for text artifacts. */
  line?: number;
  /** 1-based source column, for text artifacts. */
  column?: number;
  /** JSON pointer, for structured artifacts. */
  pointer?: string;
}

export function hasErrors(diagnostics: readonly Diagnostic[]): boolean {
  return diagnostics.some((d) => d.severity === "error");
}

export function errorsOnly(diagnostics: readonly Diagnostic[]): Diagnostic[] {
  return diagnostics.filter((d) => d.severity === "error");
}

export function formatDiagnostic(d: Diagnostic): string {
  const where =
    d.line !== undefined
      ? `${d.line}:${d.column ?? 1}: `
      : d.pointer !== undefined && d.pointer !== ""
        ? `${d.pointer}: `
        : "";
  return `${d.severity}: ${where}${d.message}`;
}
