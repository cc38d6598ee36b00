/* tslint:disable */
/* eslint-disable */

/**
 * The sinusoidal transfer problem: SMOG with three fitted meta tasks against
 * independent GPs, both refit after every observation.
 */
export class SinusoidalDemo {
    free(): void;
    [Symbol.dispose](): void;
    curves(n: number): Float64Array;
    constructor(seed: number, meta_points: number);
    /**
     * Flat `u, y0, y1` triples of the target observations.
     */
    observations(): Float64Array;
    observe(u: number): void;
    reset(): void;
    /**
     * Transfer weights, meta-task-major (`w[m * 2 + o]`).
     */
    weights(): Float64Array;
}

export function pareto_summary(points: Float64Array, reference: Float64Array): Float64Array;

export function prior_samples(rho: number, lengthscale: number, grid: number, count: number, seed: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_sinusoidaldemo_free: (a: number, b: number) => void;
    readonly pareto_summary: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly prior_samples: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly sinusoidaldemo_curves: (a: number, b: number) => [number, number, number, number];
    readonly sinusoidaldemo_new: (a: number, b: number) => [number, number, number];
    readonly sinusoidaldemo_observations: (a: number) => [number, number];
    readonly sinusoidaldemo_observe: (a: number, b: number) => [number, number];
    readonly sinusoidaldemo_reset: (a: number) => [number, number];
    readonly sinusoidaldemo_weights: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
