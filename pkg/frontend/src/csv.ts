import { readFileSync } from 'fs'

/** Parsed CSV table: named numeric/string columns plus leading `#` comments. */
export interface Table {
    columns: string[]
    rows: string[][]
    comments: string[]
}

export class SchemaMismatch extends Error {
    constructor(public readonly column: string, file: string) {
        super(`missing column '${column}' in ${file}`)
    }
}

/**
 * Read a levybool CSV: `#` comment lines, then one header row, then rows.
 * The format never quotes fields, so a plain comma split is exact.
 */
export function readCsv(path: string): Table {
    const text = readFileSync(path, 'utf8')
    const lines = text.split('\n').filter((line) => line.length > 0)
    const comments = lines.filter((line) => line.startsWith('#'))
    const data = lines.filter((line) => !line.startsWith('#'))
    if (data.length === 0) throw new Error(`empty csv: ${path}`)
    const columns = data[0].split(',')
    const rows = data.slice(1).map((line) => line.split(','))
    return { columns, rows, comments }
}

/** Numeric column accessor; throws SchemaMismatch naming the column. */
export function numericColumn(table: Table, name: string, file: string): number[] {
    const idx = table.columns.indexOf(name)
    if (idx < 0) throw new SchemaMismatch(name, file)
    return table.rows.map((row) => Number(row[idx]))
}

/** Column accessor for string-valued fields. */
export function stringColumn(table: Table, name: string, file: string): string[] {
    const idx = table.columns.indexOf(name)
    if (idx < 0) throw new SchemaMismatch(name, file)
    return table.rows.map((row) => row[idx])
}

/** True when the table has the column (for optional overlays). */
export function hasColumn(table: Table, name: string): boolean {
    return table.columns.indexOf(name) >= 0
}
