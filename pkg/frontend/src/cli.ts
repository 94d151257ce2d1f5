import { writeFileSync } from 'fs'
import { SchemaMismatch } from './csv.js'
import { FigureKind, FigureSpec, KINDS, render } from './figures.js'

function usage(): string {
    return 'usage: levybool-report <kind> --in <csv...> --out <file.svg> ' +
           `[--style-seed N]\nkinds: ${KINDS.join(', ')}`
}

/** Parse argv into a figure spec; throws on malformed flags. */
export function parseArgs(argv: string[]): FigureSpec & { out: string } {
    const [kind, ...rest] = argv
    if (!kind || !(KINDS as readonly string[]).includes(kind)) {
        throw new Error(usage())
    }
    const inputs: string[] = []
    let out = ''
    let styleSeed = 0
    for (let i = 0; i < rest.length; i++) {
        const flag = rest[i]
        if (flag === '--in') {
            while (i + 1 < rest.length && !rest[i + 1].startsWith('--')) {
                inputs.push(rest[++i])
            }
        } else if (flag === '--out') {
            out = rest[++i]
        } else if (flag === '--style-seed') {
            styleSeed = Number(rest[++i])
        } else {
            throw new Error(`unknown flag ${flag}\n${usage()}`)
        }
    }
    if (inputs.length === 0 || !out) throw new Error(usage())
    return { kind: kind as FigureKind, inputs, styleSeed, out }
}

export function main(argv: string[]): number {
    let spec
    try {
        spec = parseArgs(argv)
    } catch (err) {
        console.error((err as Error).message)
        return 2
    }
    try {
        writeFileSync(spec.out, render(spec))
    } catch (err) {
        if (err instanceof SchemaMismatch) {
            console.error(`schema mismatch: ${err.message}`)
            return 2
        }
        console.error((err as Error).message)
        return 1
    }
    console.log(spec.out)
    return 0
}

if (process.argv[1] && process.argv[1].endsWith('cli.js')) {
    process.exit(main(process.argv.slice(2)))
}
