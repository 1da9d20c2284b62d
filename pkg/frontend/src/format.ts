/** Presentation helpers for rates, similarities, and counts. */

/**
 * Render an adoption rate as a percentage.
 *
 * Two decimals are kept when they carry information (0.6123 -> "61.23%"),
 * but a trailing zero is dropped so round rates stay compact
 * (0.6 -> "60.0%"). At least one decimal is always shown.
 */
export function formatRate(rate: number): string {
  let s = (rate * 100).toFixed(2);
  if (s.endsWith("0")) {
    s = s.slice(0, -1);
  }
  return s + "%";
}

/** Cosine similarity as a one-decimal percentage (0.873 -> "87.3%"). */
export function formatSimilarity(cosine: number): string {
  return (cosine * 100).toFixed(1) + "%";
}

/** Integer with thousands separators (1706802 -> "1,706,802"). */
export function formatCount(n: number): string {
  const sign = n < 0 ? "-" : "";
  const digits = Math.abs(Math.trunc(n)).toString();
  const parts: string[] = [];
  for (let end = digits.length; end > 0; end -= 3) {
    parts.unshift(digits.slice(Math.max(0, end - 3), end));
  }
  return sign + parts.join(",");
}

/** Fold increase with two decimals (11.8735 -> "11.87x"). */
export function formatFold(fold: number): string {
  return fold.toFixed(2) + "x";
}
