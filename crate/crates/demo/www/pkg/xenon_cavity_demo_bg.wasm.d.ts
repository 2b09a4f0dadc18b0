/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const airy: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
export const calibrated_defaults: () => [number, number];
export const ratio_spectrum: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const saturation_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
