/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const demo_height: (a: number) => number;
export const demo_image_rgba: (a: number) => [number, number];
export const demo_input_semantic_rgba: (a: number) => [number, number];
export const demo_max_level: (a: number) => number;
export const demo_new: (a: bigint, b: number, c: number, d: number) => [number, number, number];
export const demo_regions: (a: number, b: number) => number;
export const demo_reweight: (a: number, b: number, c: number, d: number) => [number, number];
export const demo_segment_rgba: (a: number, b: number) => [number, number, number, number];
export const demo_semantic_accuracy: (a: number, b: number) => [number, number, number];
export const demo_semantic_rgba: (a: number, b: number) => [number, number, number, number];
export const demo_ucm_rgba: (a: number) => [number, number, number, number];
export const demo_width: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
