/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_demo_free: (a: number, b: number) => void;
export const __wbg_meshview_free: (a: number, b: number) => void;
export const __wbg_sliceview_free: (a: number, b: number) => void;
export const __wbg_transferview_free: (a: number, b: number) => void;
export const demo_cell: (a: number, b: number) => number;
export const demo_has_model: (a: number) => number;
export const demo_load_checkpoint: (a: number, b: number, c: number) => [number, number, number, number];
export const demo_mesh: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const demo_new: (a: number) => number;
export const demo_slice: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
export const demo_transfer: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const meshview_edge_count: (a: number) => number;
export const meshview_euler: (a: number) => bigint;
export const meshview_face_count: (a: number) => number;
export const meshview_indices: (a: number) => [number, number];
export const meshview_positions: (a: number) => [number, number];
export const meshview_vertex_count: (a: number) => number;
export const sliceview_labels: (a: number) => [number, number];
export const sliceview_sdf: (a: number) => [number, number];
export const sliceview_size: (a: number) => number;
export const transferview_error_rate: (a: number) => number;
export const transferview_labels: (a: number) => [number, number];
export const transferview_miou: (a: number) => number;
export const transferview_points: (a: number) => [number, number];
export const transferview_truth: (a: number) => [number, number];
export const transferview_uncertainty: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
