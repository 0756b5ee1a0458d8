import type { PolygonDraft } from "./draft.js";

export interface RequestFormState {
  email: string;
  crop: string;
  year: number;
  ratioMode: string;
}

/**
 * Submit gate: the button stays disabled until the polygon is closed, the
 * email is non-empty, and a crop is chosen. Everything else is the server's
 * call and surfaces as inline errors after submission.
 */
export function canSubmit(draft: PolygonDraft, state: RequestFormState): boolean {
  return draft.closed && state.email.trim() !== "" && state.crop !== "";
}
