/**
 * LED face decoding and rendering.
 *
 * An expression travels as 5 uppercase hex digits: left brow mask (4 bits),
 * right brow mask (4 bits), mouth mask (6 bits, two digits), eyelid
 * aperture (one digit, 0..5). The decoder here must agree bit-exactly with
 * the engine's decoder; the snapshot tests pin all seven catalog encodings.
 */

export const LEFT_BROW_BITS = 4;
export const RIGHT_BROW_BITS = 4;
export const MOUTH_BITS = 6;
export const EYELID_STEPS = 6;

/** Lit-LED layout, key-compatible with the engine's /render response. */
export interface FaceLayout {
  left_brow: number[];
  right_brow: number[];
  mouth: number[];
  eyelids_aperture: number;
}

export interface DecodedAction {
  actionId: number | null;
  leftBrow: number;
  rightBrow: number;
  mouth: number;
  eyelids: number;
}

/** The engine's seven catalog expressions, by action_id. */
export const CATALOG = [
  { actionId: 0, emotion: "anger", encoding: "C3183" },
  { actionId: 1, emotion: "disgust", encoding: "99202" },
  { actionId: 2, emotion: "fear", encoding: "66304" },
  { actionId: 3, emotion: "happiness", encoding: "181E4" },
  { actionId: 4, emotion: "sadness", encoding: "39212" },
  { actionId: 5, emotion: "surprise", encoding: "66335" },
  { actionId: 6, emotion: "neutral", encoding: "18183" },
] as const;

function bitIndices(mask: number, width: number): number[] {
  const lit: number[] = [];
  for (let i = 0; i < width; i += 1) {
    if ((mask >> i) & 1) lit.push(i);
  }
  return lit;
}

/** Parse a 5-hex-digit encoding; throws on any malformed input. */
export function decodeEncoding(encoding: string): DecodedAction {
  if (!/^[0-9a-fA-F]{5}$/.test(encoding)) {
    throw new Error(`encoding must be 5 hex digits, got ${JSON.stringify(encoding)}`);
  }
  const upper = encoding.toUpperCase();
  const leftBrow = parseInt(upper[0], 16);
  const rightBrow = parseInt(upper[1], 16);
  const mouth = parseInt(upper.slice(2, 4), 16);
  const eyelids = parseInt(upper[4], 16);
  if (mouth >= 1 << MOUTH_BITS) {
    throw new Error(`mouth value 0x${upper.slice(2, 4)} exceeds ${MOUTH_BITS} bits`);
  }
  if (eyelids >= EYELID_STEPS) {
    throw new Error(`eyelid aperture ${eyelids} out of range 0..${EYELID_STEPS - 1}`);
  }
  const hit = CATALOG.find((c) => c.encoding === upper);
  return {
    actionId: hit ? hit.actionId : null,
    leftBrow,
    rightBrow,
    mouth,
    eyelids,
  };
}

/** The lit-LED sets of a decoded action, matching the engine's layout doc. */
export function layoutOf(action: DecodedAction): FaceLayout {
  return {
    left_brow: bitIndices(action.leftBrow, LEFT_BROW_BITS),
    right_brow: bitIndices(action.rightBrow, RIGHT_BROW_BITS),
    mouth: bitIndices(action.mouth, MOUTH_BITS),
    eyelids_aperture: action.eyelids,
  };
}

/** Convenience: encoding straight to layout. */
export function decodeToLayout(encoding: string): FaceLayout {
  return layoutOf(decodeEncoding(encoding));
}

const LED_R = 7;

function led(cx: number, cy: number, on: boolean): string {
  return `<circle cx="${cx}" cy="${cy}" r="${LED_R}" class="led ${on ? "on" : "off"}"/>`;
}

/**
 * Deterministic SVG for a layout: two brow rows (4 LEDs each), a mouth row
 * (6 LEDs), and an eye pair whose lid covers (5 - aperture)/5 of the eye.
 */
export function faceSvg(layout: FaceLayout, size = 240): string {
  const parts: string[] = [];
  const lit = {
    left: new Set(layout.left_brow),
    right: new Set(layout.right_brow),
    mouth: new Set(layout.mouth),
  };
  // brows: left brow on the viewer's left, bit 0 outermost
  for (let i = 0; i < LEFT_BROW_BITS; i += 1) {
    parts.push(led(30 + i * 22, 50, lit.left.has(i)));
  }
  for (let i = 0; i < RIGHT_BROW_BITS; i += 1) {
    parts.push(led(210 - i * 22, 50, lit.right.has(i)));
  }
  // eyes: open fraction = aperture / (EYELID_STEPS - 1)
  const open = layout.eyelids_aperture / (EYELID_STEPS - 1);
  const eyeRy = Math.max(1, Math.round(16 * open));
  parts.push(`<ellipse cx="63" cy="105" rx="18" ry="${eyeRy}" class="eye"/>`);
  parts.push(`<ellipse cx="177" cy="105" rx="18" ry="${eyeRy}" class="eye"/>`);
  // mouth: bit 0 leftmost
  for (let i = 0; i < MOUTH_BITS; i += 1) {
    parts.push(led(65 + i * 22, 180, lit.mouth.has(i)));
  }
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 240 240" ` +
    `width="${size}" height="${size}" role="img">${parts.join("")}</svg>`
  );
}
