// Intensity gauge: recent vs. trailing token burn ratio, displayed on a
// semicircular dial clamped to [0, 3]. 1.0 (equal rates) sits dead center.

export const GAUGE_MIN = 0;
export const GAUGE_MAX = 3;

export function clampIntensity(value: number): number {
  if (!Number.isFinite(value)) return 1;
  return Math.min(GAUGE_MAX, Math.max(GAUGE_MIN, value));
}

/** Needle angle in degrees: -90 (far left) to +90 (far right). */
export function needleAngle(intensity: number): number {
  const v = clampIntensity(intensity);
  if (v <= 1) return -90 + (v / 1) * 90; // [0,1] maps to the left half
  return ((v - 1) / (GAUGE_MAX - 1)) * 90; // (1,3] maps to the right half
}

export type GaugeZone = "cool" | "steady" | "hot";

export function zoneOf(intensity: number): GaugeZone {
  const v = clampIntensity(intensity);
  if (v < 0.8) return "cool";
  if (v <= 1.5) return "steady";
  return "hot";
}

export function gaugeSvg(intensity: number): string {
  const angle = needleAngle(intensity);
  const zone = zoneOf(intensity);
  return `
    <svg viewBox="0 0 200 110" class="gauge gauge-${zone}" role="img" aria-label="intensity gauge">
      <path d="M 10 100 A 90 90 0 0 1 190 100" fill="none" class="gauge-arc" stroke-width="12" />
      <line x1="100" y1="100" x2="100" y2="22" class="gauge-needle"
            transform="rotate(${angle.toFixed(1)} 100 100)" stroke-width="3" />
      <circle cx="100" cy="100" r="6" class="gauge-hub" />
    </svg>`;
}
