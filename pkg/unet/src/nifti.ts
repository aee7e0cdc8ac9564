/** Minimal NIfTI-1 single-file reader/writer plus the mask-exchange layout.
 *
 * Mirrors the consumer side of the exchange contract: `.nii` / `.nii.gz`
 * single-file volumes with uint8, int16 or float32 payloads, stored as
 * axial stacks with x varying fastest. Both byte orders are accepted on
 * read (resolved via the header-size sanity check); writes are always
 * little-endian. No extensions, no .hdr/.img pairs, no NIfTI-2.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as zlib from "node:zlib";

export const HEADER_SIZE = 348;
export const VOX_OFFSET = 352;
const MAGIC_SINGLE = "n+1\0";
const MAGIC_PAIR = "ni1\0";

export const MASK_ROLES = ["kt_lax", "kt_strict", "tumor"] as const;
export type MaskRole = (typeof MASK_ROLES)[number];

export type VolumeData = Float32Array | Uint8Array | Int16Array;

export interface Volume {
  /** Flat voxel buffer, x fastest, then y, then z. */
  data: VolumeData;
  /** Grid extents [nx, ny, nz]. */
  dims: [number, number, number];
  /** Voxel edge lengths [sx, sy, sz] in mm. */
  spacing: [number, number, number];
}

export class NiftiError extends Error {}

export class NiftiFormatError extends NiftiError {}

export class UnsupportedDtypeError extends NiftiError {}

export class TruncatedFileError extends NiftiError {}

// datatype code -> [constructor, bitpix]
const DTYPES: Record<number, [new (b: ArrayBuffer) => VolumeData, number]> = {
  2: [Uint8Array as never, 8],
  4: [Int16Array as never, 16],
  16: [Float32Array as never, 32],
};

function dtypeCode(data: VolumeData): number {
  if (data instanceof Uint8Array) return 2;
  if (data instanceof Int16Array) return 4;
  return 16;
}

export function voxelCount(dims: [number, number, number]): number {
  return dims[0] * dims[1] * dims[2];
}

function readBytes(file: string): Buffer {
  let raw = fs.readFileSync(file);
  if (raw.length >= 2 && raw[0] === 0x1f && raw[1] === 0x8b) {
    raw = zlib.gunzipSync(raw);
  }
  return raw;
}

/** Parse a NIfTI-1 file; intensity scaling is applied when nontrivial. */
export function readNifti(file: string): Volume {
  const raw = readBytes(file);
  if (raw.length < HEADER_SIZE) {
    throw new TruncatedFileError(
      `file holds ${raw.length} bytes, header needs ${HEADER_SIZE}`
    );
  }
  const view = new DataView(raw.buffer, raw.byteOffset, raw.byteLength);
  let little = true;
  if (view.getInt32(0, true) !== HEADER_SIZE) {
    if (view.getInt32(0, false) !== HEADER_SIZE) {
      throw new NiftiFormatError("header size field is not 348 in either byte order");
    }
    little = false;
  }
  const magic = raw.toString("latin1", 344, 348);
  if (magic !== MAGIC_SINGLE) {
    if (magic === MAGIC_PAIR) {
      throw new NiftiFormatError("two-file (.hdr/.img) NIfTI is not supported");
    }
    throw new NiftiFormatError(`bad magic ${JSON.stringify(magic)}`);
  }
  const ndim = view.getInt16(40, little);
  if (ndim < 1 || ndim > 7) {
    throw new NiftiFormatError(`dim[0]=${ndim} outside 1..7`);
  }
  for (let axis = 4; axis <= ndim; axis++) {
    if (view.getInt16(40 + 2 * axis, little) > 1) {
      throw new UnsupportedDtypeError("only scalar 3D volumes are supported");
    }
  }
  const dims: [number, number, number] = [
    Math.max(view.getInt16(42, little), 1),
    Math.max(view.getInt16(44, little), 1),
    Math.max(view.getInt16(46, little), 1),
  ];
  const datatype = view.getInt16(70, little);
  const entry = DTYPES[datatype];
  if (!entry) {
    throw new UnsupportedDtypeError(`datatype code ${datatype}`);
  }
  const [Ctor, bitpix] = entry;
  const itemSize = bitpix / 8;
  const voxOffset = Math.round(view.getFloat32(108, little));
  if (voxOffset < HEADER_SIZE) {
    throw new NiftiFormatError(`vox_offset ${voxOffset} < ${HEADER_SIZE}`);
  }
  let slope = view.getFloat32(112, little);
  const inter = view.getFloat32(116, little);
  if (slope === 0) slope = 1; // stored 0 means "no scaling" by convention

  const n = voxelCount(dims);
  const need = n * itemSize;
  if (raw.length < voxOffset + need) {
    throw new TruncatedFileError(
      `payload holds ${Math.max(raw.length - voxOffset, 0)} bytes, dims promise ${need}`
    );
  }
  // copy out of the file buffer so the typed array is aligned and owned
  const payload = new Uint8Array(need);
  payload.set(raw.subarray(voxOffset, voxOffset + need));
  if (!little) {
    // byte-swap in place to native little-endian
    for (let i = 0; i < need; i += itemSize) {
      for (let a = 0, b = itemSize - 1; a < b; a++, b--) {
        const t = payload[i + a];
        payload[i + a] = payload[i + b];
        payload[i + b] = t;
      }
    }
  }
  let data: VolumeData = new Ctor(payload.buffer);
  if (slope !== 1 || inter !== 0) {
    // round after the multiply and again after the add, as float32 would
    const s = Math.fround(slope);
    const b = Math.fround(inter);
    const scaled = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      scaled[i] = Math.fround(Math.fround(data[i] * s) + b);
    }
    data = scaled;
  }
  const spacing: [number, number, number] = [1, 1, 1];
  for (let axis = 0; axis < 3; axis++) {
    const p = view.getFloat32(76 + 4 * (axis + 1), little);
    spacing[axis] = p !== 0 ? Math.abs(p) : 1;
  }
  return { data, dims, spacing };
}

function buildHeader(volume: Volume): Buffer {
  const header = Buffer.alloc(VOX_OFFSET); // 348 + 4 pad bytes before payload
  const view = new DataView(header.buffer, header.byteOffset, header.byteLength);
  const code = dtypeCode(volume.data);
  const bitpix = DTYPES[code][1];
  view.setInt32(0, HEADER_SIZE, true);
  view.setInt16(40, 3, true); // dim[0]
  view.setInt16(42, volume.dims[0], true);
  view.setInt16(44, volume.dims[1], true);
  view.setInt16(46, volume.dims[2], true);
  for (let axis = 4; axis <= 7; axis++) {
    view.setInt16(40 + 2 * axis, 1, true);
  }
  view.setInt16(70, code, true);
  view.setInt16(72, bitpix, true);
  view.setFloat32(76, 1, true); // pixdim[0]
  for (let axis = 0; axis < 3; axis++) {
    view.setFloat32(76 + 4 * (axis + 1), volume.spacing[axis], true);
  }
  view.setFloat32(108, VOX_OFFSET, true);
  view.setFloat32(112, 1, true); // scl_slope
  view.setFloat32(116, 0, true); // scl_inter
  view.setUint8(123, 2); // xyzt_units: mm
  header.write("unet-adapter", 148, "latin1"); // descrip
  header.write(MAGIC_SINGLE, 344, "latin1");
  return header;
}

/** Write a volume as single-file NIfTI-1; gzip when the name ends `.gz`.
 *
 * Output bytes are deterministic: zlib leaves the gzip mtime at zero and
 * level 1 keeps large float payloads cheap.
 */
export function writeNifti(file: string, volume: Volume): void {
  const n = voxelCount(volume.dims);
  if (volume.data.length !== n) {
    throw new NiftiError(
      `buffer holds ${volume.data.length} voxels, dims promise ${n}`
    );
  }
  const header = buildHeader(volume);
  const payload = Buffer.from(
    volume.data.buffer,
    volume.data.byteOffset,
    volume.data.byteLength
  );
  let blob = Buffer.concat([header, payload]);
  if (file.endsWith(".gz")) {
    blob = zlib.gzipSync(blob, { level: 1 });
  }
  fs.mkdirSync(path.dirname(file), { recursive: true });
  fs.writeFileSync(file, blob);
}

export function maskPath(directory: string, caseId: string, role: MaskRole): string {
  return path.join(directory, `${caseId}_${role}.nii.gz`);
}

/** Binarize and write one exchange mask; values are strictly {0, 1}. */
export function writeMask(
  directory: string,
  caseId: string,
  role: MaskRole,
  mask: Uint8Array,
  dims: [number, number, number]
): string {
  const data = new Uint8Array(mask.length);
  for (let i = 0; i < mask.length; i++) {
    data[i] = mask[i] !== 0 ? 1 : 0;
  }
  const file = maskPath(directory, caseId, role);
  writeNifti(file, { data, dims, spacing: [1, 1, 1] });
  return file;
}
