/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const detection_run: (a: bigint, b: number, c: number, d: number) => [number, number, number];
export const ring_scene: (a: bigint, b: number, c: number) => [number, number, number];
export const score_fit_1d: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
