/* tslint:disable */
/* eslint-disable */

export function airy(mirror_transmission: number, mirror_loss: number, single_pass_od: number, span_mhz: number, points: number): Float64Array;

/**
 * Calibrated defaults for the page's inputs: [density cm⁻³, natural FWHM MHz].
 */
export function calibrated_defaults(): Float64Array;

export function ratio_spectrum(density_cm3: number, natural_fwhm_mhz: number, probe_power_nw: number, start_thz: number, stop_thz: number, step_mhz: number): Float64Array;

export function saturation_curve(density_cm3: number, natural_fwhm_mhz: number, frequency_thz: number, min_power_nw: number, max_power_nw: number, points: number): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly airy: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly calibrated_defaults: () => [number, number];
    readonly ratio_spectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly saturation_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
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
