/* tslint:disable */
/* eslint-disable */

/**
 * Simulates a ring-mixture stream that switches distribution at
 * `change_point`, calibrates each method's threshold for the target
 * average run length, and runs the detectors over the stream.
 */
export function detection_run(seed: bigint, change_point: number, total_steps: number, gamma: number): any;

/**
 * Samples both ring mixtures and evaluates their analytic score fields
 * on a regular grid.
 */
export function ring_scene(seed: bigint, n_per_role: number, grid: number): any;

/**
 * Trains a denoising score model on the two-component 1-D mixture at
 * the requested noise scale and returns the learned score next to the
 * analytic perturbed and unperturbed scores.
 */
export function score_fit_1d(sigma: number, epochs: number, hidden: number, n_train: number, seed: bigint): any;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly detection_run: (a: bigint, b: number, c: number, d: number) => [number, number, number];
    readonly ring_scene: (a: bigint, b: number, c: number) => [number, number, number];
    readonly score_fit_1d: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number];
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
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
