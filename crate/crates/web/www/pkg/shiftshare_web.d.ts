/* tslint:disable */
/* eslint-disable */

/**
 * One simulated panel with heterogeneous sector shock means: Bartik 2SLS
 * and the correlated-random-coefficient ratio against the true estimand.
 */
export function crc_vs_bartik(input: string): string;

/**
 * The planted panel where every second-stage effect is positive and the
 * 2SLS coefficient is negative.
 */
export function sign_reversal(): string;

/**
 * Cell and location weights of the period-effects Bartik regression for a
 * single-period toy design. Input: `{"shocks": [..], "shares": [[..]]?, "no_fe": bool?}`.
 */
export function toy_weights(input: string): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly crc_vs_bartik: (a: number, b: number) => [number, number];
    readonly sign_reversal: () => [number, number];
    readonly toy_weights: (a: number, b: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
