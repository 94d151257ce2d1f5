/** Deterministic color helpers (viridis-like stops for the time axis). */

const STOPS: Array<[number, number, number]> = [
    [68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37],
]

function lerp(a: number, b: number, t: number): number {
    return Math.round(a + (b - a) * t)
}

/** Map u in [0, 1] to a hex color along the time ramp. */
export function timeColor(u: number): string {
    const clamped = Math.min(Math.max(u, 0), 1)
    const pos = clamped * (STOPS.length - 1)
    const i = Math.min(Math.floor(pos), STOPS.length - 2)
    const t = pos - i
    const [r, g, b] = [0, 1, 2].map(
        (c) => lerp(STOPS[i][c], STOPS[i + 1][c], t))
    return `#${((1 << 24) | (r << 16) | (g << 8) | b).toString(16).slice(1)}`
}

const SERIES = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e']

/** Categorical series color; styleSeed rotates the palette. */
export function seriesColor(index: number, styleSeed = 0): string {
    return SERIES[(index + styleSeed) % SERIES.length]
}
