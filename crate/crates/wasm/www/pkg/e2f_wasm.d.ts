/* tslint:disable */
/* eslint-disable */

/**
 * Per-step schedule curves over a noise schedule.
 */
export class Curves {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Zero-shot weight per step.
     */
    readonly alpha: Float64Array;
    readonly lambda: Float64Array;
    readonly sigmas: Float64Array;
    /**
     * Guidance strength per step; 0 outside the window.
     */
    readonly strength: Float64Array;
}

/**
 * A simulated scene: frames, signed event counts and the worst residual error.
 */
export class SceneView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `frames x size x size` signed event counts (stack channel 0).
     */
    readonly counts: Float32Array;
    readonly events: number;
    readonly frames: number;
    /**
     * `max |C * ch0 - dV|` over all pixels and frame gaps.
     */
    readonly maxError: number;
    /**
     * `frames x size x size` intensities.
     */
    readonly pixels: Float32Array;
    readonly size: number;
}

/**
 * Draws `runs` samples of 1-D Gaussian data `N(mu, s0^2)` through the
 * sampler with the exact posterior-mean denoiser.
 */
export function sampleGaussian(mu: number, s0: number, runs: number, steps: number, seed: bigint): Float64Array;

export function scheduleCurves(steps: number, mode: string, s_max: number, window: number, weight: string, weight_value: number, sigma_scale: number): Curves;

export function simulateScene(seed: bigint, frames: number, size: number, threshold: number): SceneView;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_curves_free: (a: number, b: number) => void;
    readonly __wbg_sceneview_free: (a: number, b: number) => void;
    readonly curves_alpha: (a: number) => [number, number];
    readonly curves_lambda: (a: number) => [number, number];
    readonly curves_sigmas: (a: number) => [number, number];
    readonly curves_strength: (a: number) => [number, number];
    readonly sampleGaussian: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly sceneview_counts: (a: number) => [number, number];
    readonly sceneview_events: (a: number) => number;
    readonly sceneview_frames: (a: number) => number;
    readonly sceneview_maxError: (a: number) => number;
    readonly sceneview_pixels: (a: number) => [number, number];
    readonly sceneview_size: (a: number) => number;
    readonly scheduleCurves: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number) => [number, number, number];
    readonly simulateScene: (a: bigint, b: number, c: number, d: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
