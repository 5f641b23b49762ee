/* tslint:disable */
/* eslint-disable */

export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    height(): number;
    image_rgba(): Uint8Array;
    /**
     * Category of the noisy per-pixel input, for comparison.
     */
    input_semantic_rgba(): Uint8Array;
    /**
     * Highest merge level; thresholds above it give one region.
     */
    max_level(): number;
    /**
     * Generates a scene and runs it to a single region.
     */
    constructor(seed: bigint, width: number, height: number, label_flip: number);
    regions(lambda: number): number;
    /**
     * Rebuilds the hierarchy with a new semantic weight, gate midpoint and
     * background prior.
     */
    reweight(w_s: number, beta: number, eta: number): void;
    /**
     * Region boundaries at `lambda` painted over the image.
     */
    segment_rgba(lambda: number): Uint8Array;
    /**
     * Fraction of pixels whose region category matches the scene truth.
     */
    semantic_accuracy(lambda: number): number;
    /**
     * Category chosen per region at `lambda`.
     */
    semantic_rgba(lambda: number): Uint8Array;
    /**
     * Ultrametric contour map on the doubled grid, scaled to 8 bits.
     */
    ucm_rgba(): Uint8Array;
    width(): number;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly demo_height: (a: number) => number;
    readonly demo_image_rgba: (a: number) => [number, number];
    readonly demo_input_semantic_rgba: (a: number) => [number, number];
    readonly demo_max_level: (a: number) => number;
    readonly demo_new: (a: bigint, b: number, c: number, d: number) => [number, number, number];
    readonly demo_regions: (a: number, b: number) => number;
    readonly demo_reweight: (a: number, b: number, c: number, d: number) => [number, number];
    readonly demo_segment_rgba: (a: number, b: number) => [number, number, number, number];
    readonly demo_semantic_accuracy: (a: number, b: number) => [number, number, number];
    readonly demo_semantic_rgba: (a: number, b: number) => [number, number, number, number];
    readonly demo_ucm_rgba: (a: number) => [number, number, number, number];
    readonly demo_width: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
