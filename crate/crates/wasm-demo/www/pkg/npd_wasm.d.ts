/* tslint:disable */
/* eslint-disable */

/**
 * Dictionary entries (real parts) with atom periods and mutual coherence.
 */
export function dictionary(family: string, p_max: number, len: number): string;

/**
 * Refined-condition lhs over `k = 1..=k_max`, `s = 1..=k`; `null` where
 * `Q_k(m)` is empty or a denominator is not positive.
 */
export function phase_map(family: string, p_max: number, len: number, m: number, k_max: number): string;

/**
 * Mix the periods in `periods` (comma separated) with coefficient floor
 * `gamma`, add noise of norm `eps`, recover with OMP and report the periods.
 */
export function recover(family: string, p_max: number, len: number, periods: string, gamma: number, eps: number, seed: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly dictionary: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly phase_map: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly recover: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
