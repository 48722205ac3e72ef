// Client-side form validation: shape checks only, mirrored from the
// service's documented domains, so bad requests never leave the browser.

export interface SessionFormValues {
  n: number;
  m: number;
  tpr: number;
  tnr: number;
  prevalence: number;
}

export function validateSessionForm(values: SessionFormValues): string[] {
  const errors: string[] = [];
  if (!Number.isInteger(values.n) || values.n < 1 || values.n > 16) {
    errors.push("patients n must be an integer in 1..16");
  }
  if (!Number.isInteger(values.m) || values.m < 1) {
    errors.push("test budget m must be a positive integer");
  }
  for (const [name, rate] of [["tpr", values.tpr], ["tnr", values.tnr]] as const) {
    if (!(rate > 0.5 && rate <= 1)) {
      errors.push(`${name} must lie in (0.5, 1]`);
    }
  }
  if (!(values.prevalence >= 0 && values.prevalence <= 1)) {
    errors.push("prevalence must lie in [0, 1]");
  }
  return errors;
}

export function validateBitstring(value: string, expectedLength: number, what: string): string[] {
  if (!/^[01]*$/.test(value)) {
    return [`${what} must contain only 0/1 characters`];
  }
  if (value.length !== expectedLength) {
    return [`${what} must have exactly ${expectedLength} bits, got ${value.length}`];
  }
  return [];
}

export function formatMarginal(value: number): string {
  return value.toFixed(4);
}

export function formatScientific(value: number): string {
  return value.toExponential(3);
}
