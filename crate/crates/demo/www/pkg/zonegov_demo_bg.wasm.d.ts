/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demoworld_free: (a: number, b: number) => void;
export const decodeFrame: (a: number, b: number) => [number, number, number, number];
export const demoworld_emergency: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demoworld_horn: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const demoworld_new: (a: number, b: number) => [number, number, number];
export const demoworld_step: (a: number, b: number) => [number, number];
export const encodeFrame: (a: number, b: number) => [number, number, number, number];
export const exampleScenario: () => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
