/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_sinusoidaldemo_free: (a: number, b: number) => void;
export const pareto_summary: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const prior_samples: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const sinusoidaldemo_curves: (a: number, b: number) => [number, number, number, number];
export const sinusoidaldemo_new: (a: number, b: number) => [number, number, number];
export const sinusoidaldemo_observations: (a: number) => [number, number];
export const sinusoidaldemo_observe: (a: number, b: number) => [number, number];
export const sinusoidaldemo_reset: (a: number) => [number, number];
export const sinusoidaldemo_weights: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
