/* tslint:disable */
/* eslint-disable */

/**
 * Page state: the seed of the procedural families and an optional trained
 * model whose codes belong to shapes `0..shapes` of one family.
 */
export class Demo {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Grid spacing of a mesh resolution, for display.
     */
    cell(resolution: number): number;
    has_model(): boolean;
    /**
     * Load a checkpoint; returns a one-line summary.
     */
    load_checkpoint(bytes: Uint8Array): string;
    /**
     * Mesh of the analytic shape, or with `learned` of the trained shape
     * field (`index` in range) or template (`index` past the codes).
     */
    mesh(family_name: string, index: number, resolution: number, learned: boolean): MeshView;
    constructor(seed: number);
    slice(family_name: string, index: number, z: number, size: number): SliceView;
    transfer(family_name: string, source: number, target: number, n: number, learned: boolean): TransferView;
}

export class MeshView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly edge_count: number;
    readonly euler: bigint;
    readonly face_count: number;
    readonly indices: Uint32Array;
    /**
     * Flat xyz triples.
     */
    readonly positions: Float32Array;
    readonly vertex_count: number;
}

export class SliceView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly labels: Uint32Array;
    readonly sdf: Float64Array;
    readonly size: number;
}

export class TransferView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Fraction of target points whose voted label is wrong.
     */
    readonly error_rate: number;
    readonly labels: Uint32Array;
    readonly miou: number;
    /**
     * Target surface samples, flat xyz.
     */
    readonly points: Float32Array;
    readonly truth: Uint32Array;
    readonly uncertainty: Float64Array;
}

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_demo_free: (a: number, b: number) => void;
    readonly __wbg_meshview_free: (a: number, b: number) => void;
    readonly __wbg_sliceview_free: (a: number, b: number) => void;
    readonly __wbg_transferview_free: (a: number, b: number) => void;
    readonly demo_cell: (a: number, b: number) => number;
    readonly demo_has_model: (a: number) => number;
    readonly demo_load_checkpoint: (a: number, b: number, c: number) => [number, number, number, number];
    readonly demo_mesh: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly demo_new: (a: number) => number;
    readonly demo_slice: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number];
    readonly demo_transfer: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly meshview_edge_count: (a: number) => number;
    readonly meshview_euler: (a: number) => bigint;
    readonly meshview_face_count: (a: number) => number;
    readonly meshview_indices: (a: number) => [number, number];
    readonly meshview_positions: (a: number) => [number, number];
    readonly meshview_vertex_count: (a: number) => number;
    readonly sliceview_labels: (a: number) => [number, number];
    readonly sliceview_sdf: (a: number) => [number, number];
    readonly sliceview_size: (a: number) => number;
    readonly transferview_error_rate: (a: number) => number;
    readonly transferview_labels: (a: number) => [number, number];
    readonly transferview_miou: (a: number) => number;
    readonly transferview_points: (a: number) => [number, number];
    readonly transferview_truth: (a: number) => [number, number];
    readonly transferview_uncertainty: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
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
