/**
 * JSON types mirroring the service schema (docs/api.md in the main package).
 * The UI never computes model math; these shapes are the whole contract.
 */

export type Axis = 'h' | 'v';

export interface Guideline {
  axis: Axis;
  pos: number;
}

export interface ElementBox {
  class: string;
  ix_min: number;
  iy_min: number;
  ix_max: number;
  iy_max: number;
}

export interface LayoutDoc {
  id: string | null;
  dataset: string | null;
  elements: ElementBox[];
}

export interface GenerateRequest {
  guidelines: Guideline[];
  n: number | null;
  w: number;
  seed: number;
  checkpoint_id?: string | null;
}

export interface GenerateResponse {
  layout: LayoutDoc;
  latent_meta: { seed: number; n: number; w: number };
  svg: string;
  request: GenerateRequest;
}

export interface EditResponse {
  layout: LayoutDoc;
  svg: string;
}

export interface VariationResponse {
  layouts: LayoutDoc[];
}

export interface MetaResponse {
  checkpoint_id: string;
  vocab: { dataset: string; classes: { index: number; name: string; color: string }[] };
  grid: { width: number; height: number };
  T: number;
  w_default: number;
  p_n: number[];
  max_trained_elements: number;
}

export interface ServiceError {
  code: string;
  message: string;
  field: string | null;
}

/** Serializable editor state; reloading one reproduces the exact layout. */
export interface Session {
  version: 1;
  guidelines: Guideline[];
  n: number | null;
  w: number;
  seed: number;
}

export const GRID_WIDTH = 36;
export const GRID_HEIGHT = 64;
