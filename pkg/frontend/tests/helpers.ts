/**
 * Assertions shared by the contract tests.
 *
 * The core invariant: the UI renders no number of its own.  Every numeric
 * token in rendered text must occur in the service payload it was rendered
 * from, except bare list positions (step and rank ordinals), which are the
 * 1-based indexes of payload arrays.
 */

export function numericTokens(text: string): string[] {
  return text.match(/\d+(?:\.\d+)?/g) ?? [];
}

export function payloadNumberTokens(payload: unknown): Set<string> {
  return new Set(numericTokens(JSON.stringify(payload)));
}

/**
 * Every number in `rendered` must come from `payload`, allowing 1-based
 * ordinals up to `maxOrdinal` for list numbering.  Returns the offending
 * tokens so callers can assert the list is empty.
 */
export function foreignNumbers(rendered: string, payload: unknown, maxOrdinal = 0): string[] {
  const allowed = payloadNumberTokens(payload);
  for (let position = 1; position <= maxOrdinal; position += 1) {
    allowed.add(String(position));
  }
  return numericTokens(rendered).filter((token) => !allowed.has(token));
}
