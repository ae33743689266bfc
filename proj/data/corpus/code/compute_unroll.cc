// Compute module: P parallel multiplier lanes, unrolled by the HLS pragma.
for (int i = 0; i < length; i += P) {
  for (int lane = 0; lane < P; lane++) {
#pragma HLS unroll
    Z[i + lane] = X[i + lane] * Y[i + lane];
  }
  wait();
}
