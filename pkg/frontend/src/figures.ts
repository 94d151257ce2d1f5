import { Table, hasColumn, numericColumn, readCsv, stringColumn } from './csv.js'
import { seriesColor, timeColor } from './colors.js'
import { Extent, Frame, extent, fmt, frame } from './svg.js'

export const KINDS = ['trajectory', 'survival', 'rate-ladder',
                      'coverage-slope', 'goodbox-series'] as const
export type FigureKind = typeof KINDS[number]

export interface FigureSpec {
    kind: FigureKind
    inputs: string[]
    styleSeed: number
}

const W = 560
const H = 400

/**
 * Node paths colored by time, with the starting configuration marked by
 * red crosses. Input: trajectory table (id, t, x0, x1[, ...], radius).
 */
function renderTrajectory(spec: FigureSpec): string {
    const file = spec.inputs[0]
    const table = readCsv(file)
    const ids = numericColumn(table, 'id', file)
    const t = numericColumn(table, 't', file)
    const x = numericColumn(table, 'x0', file)
    const y = numericColumn(table, 'x1', file)
    const tMax = Math.max(...t, 1e-12)
    const f = frame(W, H, extent(x), extent(y), 'x', 'y')
    const byId = new Map<number, number[]>()
    ids.forEach((id, row) => {
        if (!byId.has(id)) byId.set(id, [])
        byId.get(id)!.push(row)
    })
    for (const rows of byId.values()) {
        rows.sort((a, b) => t[a] - t[b])
        for (let j = 1; j < rows.length; j++) {
            const a = rows[j - 1]
            const b = rows[j]
            f.svg.polyline(
                [[f.x(x[a]), f.y(y[a])], [f.x(x[b]), f.y(y[b])]],
                timeColor(t[b] / tMax))
        }
    }
    for (const rows of byId.values()) {
        const first = rows[0]
        f.svg.cross(f.x(x[first]), f.y(y[first]), 4, '#d62728')
    }
    f.svg.text(W - 18, 14, `time 0 to ${fmt(tMax)}`, 'end')
    return f.svg.render()
}

/**
 * Survival estimates on a log axis with CI whiskers; when a fit table is
 * supplied its rate line is overlaid and the slope labelled. No statistics
 * are recomputed, only display transforms.
 */
function renderSurvival(spec: FigureSpec): string {
    const file = spec.inputs[0]
    const table = readCsv(file)
    const t = numericColumn(table, 't', file)
    const s = numericColumn(table, 'survival', file)
    const ci = numericColumn(table, 'ci', file)
    const method = stringColumn(table, 'method', file)
    const logS = s.map((v) => Math.log10(Math.max(v, 1e-300)))
    const visible = logS.filter((v) => v > -300)
    const yExt = extent(visible)
    const f = frame(W, H, extent(t), yExt, 't', 'log10 survival')
    const methods = [...new Set(method)]
    methods.forEach((name, mi) => {
        const color = seriesColor(mi, spec.styleSeed)
        const pts: Array<[number, number]> = []
        t.forEach((ti, row) => {
            if (method[row] !== name || s[row] <= 0) return
            pts.push([f.x(ti), f.y(logS[row])])
            const up = Math.log10(s[row] + ci[row])
            const dn = Math.log10(Math.max(s[row] - ci[row], 1e-300))
            f.svg.line(f.x(ti), f.y(Math.max(dn, yExt.lo)), f.x(ti),
                       f.y(Math.min(up, yExt.hi)), color, 0.7)
        })
        f.svg.polyline(pts, color)
        f.svg.text(W - 18, 14 + 13 * mi, name, 'end', color)
    })
    if (spec.inputs.length > 1) {
        const fitFile = spec.inputs[1]
        const fit = readCsv(fitFile)
        const rate = numericColumn(fit, 'rate', fitFile)[0]
        const intercept = numericColumn(fit, 'intercept', fitFile)[0]
        const line: Array<[number, number]> = t.map((ti) => [
            f.x(ti), f.y((-rate * ti - intercept) / Math.LN10)])
        f.svg.polyline(line, '#555')
        f.svg.text(W - 18, 14 + 13 * methods.length,
                   `fitted rate ${rate.toFixed(2)}`, 'end', '#555')
    }
    return f.svg.render()
}

/** Volume-growth estimates per unit time over the horizon ladder, with a
 * horizontal reference line read from the table's target column. */
function renderRateLadder(spec: FigureSpec): string {
    const file = spec.inputs[0]
    const table = readCsv(file)
    const t = numericColumn(table, 't', file)
    const est = numericColumn(table, 'estimate', file)
    const ci = numericColumn(table, 'ci', file)
    const target = numericColumn(table, 'target', file)
    const yExt = extent([...est.map((v, i) => v + ci[i]),
                         ...est.map((v, i) => v - ci[i]), target[0]])
    const f = frame(W, H, extent(t), yExt, 'horizon t', 'volume per unit time')
    const color = seriesColor(0, spec.styleSeed)
    t.forEach((ti, i) => {
        f.svg.line(f.x(ti), f.y(est[i] - ci[i]), f.x(ti), f.y(est[i] + ci[i]),
                   color, 0.8)
        f.svg.circle(f.x(ti), f.y(est[i]), 3, color)
    })
    f.svg.polyline(t.map((ti, i) => [f.x(ti), f.y(est[i])]), color)
    f.svg.line(f.x(t[0]), f.y(target[0]), f.x(t[t.length - 1]),
               f.y(target[0]), '#777', 1, '5,4')
    f.svg.text(W - 18, 14, `limit ${fmt(target[0])}`, 'end', '#777')
    return f.svg.render()
}

/** Coverage-time ratios mean T / log k against k, log-x, with the slope
 * reference line from the target column. */
function renderCoverageSlope(spec: FigureSpec): string {
    const file = spec.inputs[0]
    const table = readCsv(file)
    const k = numericColumn(table, 'k', file)
    const upper = numericColumn(table, 'mean_upper', file)
    const lower = numericColumn(table, 'mean_lower', file)
    const ci = numericColumn(table, 'ci', file)
    const target = numericColumn(table, 'target', file)[0]
    const logk = k.map((v) => Math.log2(v))
    const ratios = upper.map((v, i) => v / Math.log(k[i]))
    const ratiosLo = lower.map((v, i) => v / Math.log(k[i]))
    const yExt = extent([...ratios, ...ratiosLo, target, 0])
    const f = frame(W, H, extent(logk), yExt, 'log2 k', 'mean T / log k')
    const cU = seriesColor(0, spec.styleSeed)
    const cL = seriesColor(1, spec.styleSeed)
    logk.forEach((lk, i) => {
        const hw = ci[i] / Math.log(k[i])
        f.svg.line(f.x(lk), f.y(ratios[i] - hw), f.x(lk), f.y(ratios[i] + hw),
                   cU, 0.8)
    })
    f.svg.polyline(logk.map((lk, i) => [f.x(lk), f.y(ratios[i])]), cU)
    f.svg.polyline(logk.map((lk, i) => [f.x(lk), f.y(ratiosLo[i])]), cL)
    logk.forEach((lk, i) => f.svg.circle(f.x(lk), f.y(ratios[i]), 3, cU))
    logk.forEach((lk, i) => f.svg.circle(f.x(lk), f.y(ratiosLo[i]), 3, cL))
    f.svg.line(f.x(logk[0]), f.y(target), f.x(logk[logk.length - 1]),
               f.y(target), '#777', 1, '5,4')
    f.svg.text(W - 18, 14, 'upper proxy', 'end', cU)
    f.svg.text(W - 18, 27, 'lower proxy', 'end', cL)
    f.svg.text(W - 18, 40, `reference ${fmt(target)}`, 'end', '#777')
    return f.svg.render()
}

/** Good/bad flags over integer times with the overall fraction labelled
 * from the table's own column. */
function renderGoodboxSeries(spec: FigureSpec): string {
    const file = spec.inputs[0]
    const table = readCsv(file)
    const i = numericColumn(table, 'i', file)
    const flag = numericColumn(table, 'good_flag', file)
    const f = frame(W, H, extent(i), { lo: -0.15, hi: 1.15 }, 'integer time',
                    'box is good')
    const color = seriesColor(0, spec.styleSeed)
    i.forEach((ti, row) => {
        f.svg.line(f.x(ti), f.y(0), f.x(ti), f.y(flag[row]), color, 0.6)
        f.svg.circle(f.x(ti), f.y(flag[row]), 2.5,
                     flag[row] > 0 ? color : '#d62728')
    })
    if (hasColumn(table, 'good_fraction')) {
        const frac = numericColumn(table, 'good_fraction', file)[0]
        f.svg.text(W - 18, 14, `good fraction ${frac}`, 'end')
    }
    return f.svg.render()
}

const RENDERERS: Record<FigureKind, (spec: FigureSpec) => string> = {
    'trajectory': renderTrajectory,
    'survival': renderSurvival,
    'rate-ladder': renderRateLadder,
    'coverage-slope': renderCoverageSlope,
    'goodbox-series': renderGoodboxSeries,
}

/** Render a figure to SVG text; pure function of the inputs and seed. */
export function render(spec: FigureSpec): string {
    const impl = RENDERERS[spec.kind]
    if (!impl) throw new Error(`unknown figure kind '${spec.kind}'`)
    return impl(spec)
}
