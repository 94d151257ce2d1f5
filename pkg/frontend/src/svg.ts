/**
 * Minimal deterministic SVG builder: no timestamps, no randomness, fixed
 * number formatting, so identical inputs produce identical bytes.
 */

export interface Extent { lo: number; hi: number }

/** Shortest stable decimal for coordinates (2 decimal places suffice). */
export function fmt(x: number): string {
    if (!isFinite(x)) return '0'
    const rounded = Math.round(x * 100) / 100
    return String(rounded)
}

export function extent(values: number[], padFrac = 0.05): Extent {
    let lo = Infinity
    let hi = -Infinity
    for (const v of values) {
        if (!isFinite(v)) continue
        if (v < lo) lo = v
        if (v > hi) hi = v
    }
    if (!isFinite(lo)) { lo = 0; hi = 1 }
    if (lo === hi) { lo -= 1; hi += 1 }
    const pad = (hi - lo) * padFrac
    return { lo: lo - pad, hi: hi + pad }
}

/** Affine map from data extent to pixel range. */
export function scale(ext: Extent, pixLo: number, pixHi: number) {
    const span = ext.hi - ext.lo
    return (v: number) => pixLo + ((v - ext.lo) / span) * (pixHi - pixLo)
}

/** Round tick positions covering the extent. */
export function ticks(ext: Extent, count = 5): number[] {
    const span = ext.hi - ext.lo
    const step = Math.pow(10, Math.floor(Math.log10(span / count)))
    const err = span / count / step
    const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1
    const s = step * mult
    const out: number[] = []
    for (let v = Math.ceil(ext.lo / s) * s; v <= ext.hi + 1e-12; v += s) {
        out.push(Math.round(v / s) * s)
    }
    return out
}

export class Svg {
    private parts: string[] = []
    constructor(readonly width: number, readonly height: number) {
        this.parts.push(
            `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
            `height="${height}" viewBox="0 0 ${width} ${height}" ` +
            `font-family="sans-serif" font-size="11">`)
        this.parts.push(`<rect width="${width}" height="${height}" fill="white"/>`)
    }

    line(x1: number, y1: number, x2: number, y2: number, stroke: string,
         width = 1, dash = ''): void {
        const d = dash ? ` stroke-dasharray="${dash}"` : ''
        this.parts.push(
            `<line x1="${fmt(x1)}" y1="${fmt(y1)}" x2="${fmt(x2)}" ` +
            `y2="${fmt(y2)}" stroke="${stroke}" stroke-width="${width}"${d}/>`)
    }

    polyline(points: Array<[number, number]>, stroke: string, width = 1.2): void {
        const attr = points.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(' ')
        this.parts.push(
            `<polyline points="${attr}" fill="none" stroke="${stroke}" ` +
            `stroke-width="${width}"/>`)
    }

    circle(x: number, y: number, r: number, fill: string): void {
        this.parts.push(
            `<circle cx="${fmt(x)}" cy="${fmt(y)}" r="${r}" fill="${fill}"/>`)
    }

    cross(x: number, y: number, size: number, stroke: string): void {
        this.line(x - size, y - size, x + size, y + size, stroke, 1.4)
        this.line(x - size, y + size, x + size, y - size, stroke, 1.4)
    }

    text(x: number, y: number, content: string, anchor = 'start',
         fill = '#222'): void {
        this.parts.push(
            `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" ` +
            `fill="${fill}">${content}</text>`)
    }

    render(): string {
        return this.parts.join('\n') + '\n</svg>\n'
    }
}

export interface Frame {
    svg: Svg
    x: (v: number) => number
    y: (v: number) => number
}

/** Axes, tick marks and labels around a plotting frame. */
export function frame(width: number, height: number, xExt: Extent,
                      yExt: Extent, xLabel: string, yLabel: string,
                      yTickFormat: (v: number) => string = fmt): Frame {
    const m = { left: 56, right: 16, top: 18, bottom: 40 }
    const svg = new Svg(width, height)
    const x = scale(xExt, m.left, width - m.right)
    const y = scale(yExt, height - m.bottom, m.top)
    svg.line(m.left, height - m.bottom, width - m.right, height - m.bottom, '#333')
    svg.line(m.left, m.top, m.left, height - m.bottom, '#333')
    for (const t of ticks(xExt)) {
        svg.line(x(t), height - m.bottom, x(t), height - m.bottom + 4, '#333')
        svg.text(x(t), height - m.bottom + 16, fmt(t), 'middle')
    }
    for (const t of ticks(yExt)) {
        svg.line(m.left - 4, y(t), m.left, y(t), '#333')
        svg.text(m.left - 7, y(t) + 3, yTickFormat(t), 'end')
    }
    svg.text((m.left + width - m.right) / 2, height - 8, xLabel, 'middle')
    svg.text(14, m.top - 4, yLabel, 'start')
    return { svg, x, y }
}
