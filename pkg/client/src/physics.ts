/**
 * Two-level Schroedinger integrator, written from scratch on purpose so a
 * loopback run against the optimization server is a genuine
 * cross-implementation check rather than the same code talking to itself.
 *
 * H(t) = (delta/2) sigma_z + (f(t)/2) sigma_x.  Each grid interval uses the
 * midpoint control value and the exact SU(2) rotation
 * exp(-i dt (f, 0, delta).sigma / 2), applied to the complex 2-vector state.
 */

export interface Complex2 {
  re0: number;
  im0: number;
  re1: number;
  im1: number;
}

export function integrateTwoLevel(
  delta: number,
  times: number[],
  values: number[],
): Complex2 {
  if (times.length !== values.length || times.length < 2) {
    throw new Error("times and values must be equal length, at least 2 samples");
  }
  // start in the ground state |0>
  let a_re = 1, a_im = 0, b_re = 0, b_im = 0;
  for (let k = 0; k + 1 < times.length; k++) {
    const dt = times[k + 1] - times[k];
    const f = 0.5 * (values[k] + values[k + 1]);
    const omega = Math.hypot(f, delta);
    const theta = 0.5 * omega * dt;
    const c = Math.cos(theta);
    const s = omega > 0 ? Math.sin(theta) / omega : 0.5 * dt;
    // U = c*I - i*s*(f*sigma_x + delta*sigma_z)
    const sz = s * delta;
    const sx = s * f;
    const na_re = c * a_re + sz * a_im + sx * b_im;
    const na_im = c * a_im - sz * a_re - sx * b_re;
    const nb_re = c * b_re - sz * b_im + sx * a_im;
    const nb_im = c * b_im + sz * b_re - sx * a_re;
    a_re = na_re; a_im = na_im; b_re = nb_re; b_im = nb_im;
  }
  return { re0: a_re, im0: a_im, re1: b_re, im1: b_im };
}

/** Population of the excited state |1> after the pulse: the transfer fidelity. */
export function transferFidelity(delta: number, times: number[], values: number[]): number {
  const psi = integrateTwoLevel(delta, times, values);
  return psi.re1 * psi.re1 + psi.im1 * psi.im1;
}
