/* tslint:disable */
/* eslint-disable */

/**
 * LHS bound, quantum bound and target angle, one `key: value` per line.
 */
export function bounds(family: string, alpha: number, beta: number): string;

/**
 * Copies needed to certify infidelity below `epsilon` at significance `delta`.
 * Only families with a closed-form certificate slope are accepted.
 */
export function sample_plan(family: string, alpha: number, beta: number, epsilon: number, delta: number): string;

/**
 * Certified fidelity in the three trust scenarios for the tilted family,
 * as CSV over `points` violations from the LHS bound to the quantum bound.
 */
export function scenario_curve(alpha: number, points: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly bounds: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly sample_plan: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly scenario_curve: (a: number, b: number) => [number, number, number, number];
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
