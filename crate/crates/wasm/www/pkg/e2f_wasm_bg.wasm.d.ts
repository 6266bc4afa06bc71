/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_curves_free: (a: number, b: number) => void;
export const __wbg_sceneview_free: (a: number, b: number) => void;
export const curves_alpha: (a: number) => [number, number];
export const curves_lambda: (a: number) => [number, number];
export const curves_sigmas: (a: number) => [number, number];
export const curves_strength: (a: number) => [number, number];
export const sampleGaussian: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
export const sceneview_counts: (a: number) => [number, number];
export const sceneview_events: (a: number) => number;
export const sceneview_frames: (a: number) => number;
export const sceneview_maxError: (a: number) => number;
export const sceneview_pixels: (a: number) => [number, number];
export const sceneview_size: (a: number) => number;
export const scheduleCurves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
export const simulateScene: (a: bigint, b: number, c: number, d: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
