// Load module: reads X and Y from two AXI-Stream inputs into on-chip buffers.
void ACCNAME::Send() {
  for (int i = 0; i < length; i++) {
    X[i] = din1.read().data;
    Y[i] = din2.read().data;
    wait();
  }
}
