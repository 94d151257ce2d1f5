import { describe, expect, it } from 'vitest'
import { mkdtempSync, readFileSync, writeFileSync } from 'fs'
import { tmpdir } from 'os'
import { join } from 'path'
import { fileURLToPath } from 'url'

import { render } from '../src/figures.js'
import { SchemaMismatch, readCsv } from '../src/csv.js'
import { main } from '../src/cli.js'

const samples = join(fileURLToPath(new URL('.', import.meta.url)), '..', 'samples')

describe('figure rendering from shipped samples', () => {
    const cases: Array<[string, string[]]> = [
        ['trajectory', [join(samples, 'trajectory.csv')]],
        ['survival', [join(samples, 'survival.csv'), join(samples, 'survival_fit.csv')]],
        ['rate-ladder', [join(samples, 'rate_ladder.csv')]],
        ['coverage-slope', [join(samples, 'coverage.csv')]],
        ['goodbox-series', [join(samples, 'goodbox.csv')]],
    ]
    for (const [kind, inputs] of cases) {
        it(`renders ${kind}`, () => {
            const svg = render({ kind: kind as never, inputs, styleSeed: 0 })
            expect(svg.startsWith('<svg')).toBe(true)
            expect(svg.length).toBeGreaterThan(500)
            expect(svg).toContain('</svg>')
        })
    }

    it('labels the fitted slope 2.00 on the synthetic curve', () => {
        const svg = render({
            kind: 'survival',
            inputs: [join(samples, 'survival.csv'), join(samples, 'survival_fit.csv')],
            styleSeed: 0,
        })
        expect(svg).toContain('fitted rate 2.00')
    })

    it('is a pure function of inputs and style seed', () => {
        const spec = { kind: 'trajectory' as const, inputs: [join(samples, 'trajectory.csv')], styleSeed: 3 }
        expect(render(spec)).toBe(render(spec))
    })

    it('marks initial positions with red crosses on trajectories', () => {
        const svg = render({ kind: 'trajectory', inputs: [join(samples, 'trajectory.csv')], styleSeed: 0 })
        expect(svg).toContain('#d62728')
    })

    it('draws the coverage reference line from the target column', () => {
        const table = readCsv(join(samples, 'coverage.csv'))
        expect(table.columns).toContain('target')
        const svg = render({ kind: 'coverage-slope', inputs: [join(samples, 'coverage.csv')], styleSeed: 0 })
        expect(svg).toContain('reference')
    })
})

describe('schema checking', () => {
    it('names the missing column', () => {
        const dir = mkdtempSync(join(tmpdir(), 'lvb-'))
        const bad = join(dir, 'bad.csv')
        writeFileSync(bad, 't,value\n0,1\n')
        expect(() => render({ kind: 'survival', inputs: [bad], styleSeed: 0 }))
            .toThrowError(SchemaMismatch)
        try {
            render({ kind: 'survival', inputs: [bad], styleSeed: 0 })
        } catch (err) {
            expect((err as SchemaMismatch).column).toBe('survival')
        }
    })

    it('cli exits 2 on schema mismatch and names the column', () => {
        const dir = mkdtempSync(join(tmpdir(), 'lvb-'))
        const bad = join(dir, 'bad.csv')
        writeFileSync(bad, 'a,b\n1,2\n')
        const code = main(['goodbox-series', '--in', bad, '--out', join(dir, 'o.svg')])
        expect(code).toBe(2)
    })

    it('cli writes the figure and exits 0', () => {
        const dir = mkdtempSync(join(tmpdir(), 'lvb-'))
        const out = join(dir, 'fig.svg')
        const code = main(['goodbox-series', '--in', join(samples, 'goodbox.csv'), '--out', out])
        expect(code).toBe(0)
        expect(readFileSync(out, 'utf8')).toContain('<svg')
    })
})
