/* tslint:disable */
/* eslint-disable */

export class DemoWorld {
    free(): void;
    [Symbol.dispose](): void;
    emergency(zone: string, on: boolean): string;
    horn(vehicle: string, pressed: boolean): string;
    constructor(scenario_toml: string);
    step(ticks: number): string;
}

export function decodeFrame(hex: string): string;

export function encodeFrame(address: number, data: number): string;

export function exampleScenario(): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demoworld_free: (a: number, b: number) => void;
    readonly decodeFrame: (a: number, b: number) => [number, number, number, number];
    readonly demoworld_emergency: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demoworld_horn: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly demoworld_new: (a: number, b: number) => [number, number, number];
    readonly demoworld_step: (a: number, b: number) => [number, number];
    readonly encodeFrame: (a: number, b: number) => [number, number, number, number];
    readonly exampleScenario: () => [number, number];
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
