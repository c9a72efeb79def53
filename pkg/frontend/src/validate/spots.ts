/** Client-side twin of the server's rhythm-spot validation.
 *
 * A payload this module passes is one the server will accept; a payload
 * it rejects would come back 422.  The rules, in the order the server
 * applies them: clip duration non-negative, every onset inside
 * [0, clip_duration] (both ends inclusive), onsets strictly increasing.
 */

import type { Diagnostic, SpotsPayload } from "../api/types.js";

export function validateSpots(payload: SpotsPayload): Diagnostic[] {
  const problems: Diagnostic[] = [];
  const { clip_duration: duration, onsets } = payload;
  if (!Number.isFinite(duration) || duration < 0) {
    problems.push({ severity: "error", message: `clip duration must be non-negative, got ${duration}` });
    return problems;
  }
  for (const t of onsets) {
    if (!Number.isFinite(t) || t < 0 || t > duration) {
      problems.push({ severity: "error", message: `onset ${t} outside [0, ${duration}]` });
      return problems;
    }
  }
  for (let i = 1; i < onsets.length; i += 1) {
    const a = onsets[i - 1]!;
    const b = onsets[i]!;
    if (b <= a) {
      problems.push({ severity: "error", message: `onsets not strictly increasing at ${b}` });
      return problems;
    }
  }
  return problems;
}

export function spotsAreValid(payload: SpotsPayload): boolean {
  return validateSpots(payload).length === 0;
}
