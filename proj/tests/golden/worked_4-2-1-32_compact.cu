// Generated SPMM kernel. Schedule UFi-UFk-WarpTile-ThreadBlockSize = 4-2-1-32.
// Compacted: one body per popcount class, rows come from RowOff.

#define ESC_UFI 4
#define ESC_UFK 2
#define ESC_WARP_TILE 1
#define ESC_TBS 32

// Columns past N belong to idle lanes of the last j step.
__device__ __forceinline__ float ldB(const float* __restrict__ B, int row, int col, int N) {
  return col < N ? B[row * N + col] : 0.0f;
}
__device__ __forceinline__ void flush(float* __restrict__ C, int row, int col, int N, float v) {
  if (col < N) atomicAdd(&C[row * N + col], v);
}
__device__ __forceinline__ int esc_popcount(unsigned v) {
  int n = 0;
  for (; v != 0u; v &= v - 1u) ++n;
  return n;
}

__device__ __forceinline__ void esc_body_p1(const float* __restrict__ ANNZ, const int* __restrict__ Cols, const int* __restrict__ RPP, const int* __restrict__ NPP, const int* __restrict__ RowOff, const float* __restrict__ B, float* __restrict__ C, int N, int g, int i, int tid) {
  // body begin p1
  int ro0 = RowOff[4*g+0];
  for (int j = 0; j < N; j += 32) {
    float c00 = 0.0f;
    int t_nnz = NPP[g];
    for (int k = RPP[g]; k < RPP[g+1]; k += 2) {
      int br0 = Cols[k+0];
      int br1 = Cols[k+1];
      c00 += ANNZ[t_nnz+0] * ldB(B, br0, j+tid, N);
      c00 += ANNZ[t_nnz+1] * ldB(B, br1, j+tid, N);
      t_nnz += 2;
    }
    flush(C, i+ro0, j+tid, N, c00);
  }
  // body end
}
__device__ __forceinline__ void esc_body_p2(const float* __restrict__ ANNZ, const int* __restrict__ Cols, const int* __restrict__ RPP, const int* __restrict__ NPP, const int* __restrict__ RowOff, const float* __restrict__ B, float* __restrict__ C, int N, int g, int i, int tid) {
  // body begin p2
  int ro0 = RowOff[4*g+0];
  int ro1 = RowOff[4*g+1];
  for (int j = 0; j < N; j += 32) {
    float c00 = 0.0f;
    float c10 = 0.0f;
    int t_nnz = NPP[g];
    for (int k = RPP[g]; k < RPP[g+1]; k += 2) {
      int br0 = Cols[k+0];
      int br1 = Cols[k+1];
      c00 += ANNZ[t_nnz+0] * ldB(B, br0, j+tid, N);
      c10 += ANNZ[t_nnz+1] * ldB(B, br0, j+tid, N);
      c00 += ANNZ[t_nnz+2] * ldB(B, br1, j+tid, N);
      c10 += ANNZ[t_nnz+3] * ldB(B, br1, j+tid, N);
      t_nnz += 4;
    }
    flush(C, i+ro0, j+tid, N, c00);
    flush(C, i+ro1, j+tid, N, c10);
  }
  // body end
}
__device__ __forceinline__ void esc_body_p3(const float* __restrict__ ANNZ, const int* __restrict__ Cols, const int* __restrict__ RPP, const int* __restrict__ NPP, const int* __restrict__ RowOff, const float* __restrict__ B, float* __restrict__ C, int N, int g, int i, int tid) {
  // body begin p3
  int ro0 = RowOff[4*g+0];
  int ro1 = RowOff[4*g+1];
  int ro2 = RowOff[4*g+2];
  for (int j = 0; j < N; j += 32) {
    float c00 = 0.0f;
    float c10 = 0.0f;
    float c20 = 0.0f;
    int t_nnz = NPP[g];
    for (int k = RPP[g]; k < RPP[g+1]; k += 2) {
      int br0 = Cols[k+0];
      int br1 = Cols[k+1];
      c00 += ANNZ[t_nnz+0] * ldB(B, br0, j+tid, N);
      c10 += ANNZ[t_nnz+1] * ldB(B, br0, j+tid, N);
      c20 += ANNZ[t_nnz+2] * ldB(B, br0, j+tid, N);
      c00 += ANNZ[t_nnz+3] * ldB(B, br1, j+tid, N);
      c10 += ANNZ[t_nnz+4] * ldB(B, br1, j+tid, N);
      c20 += ANNZ[t_nnz+5] * ldB(B, br1, j+tid, N);
      t_nnz += 6;
    }
    flush(C, i+ro0, j+tid, N, c00);
    flush(C, i+ro1, j+tid, N, c10);
    flush(C, i+ro2, j+tid, N, c20);
  }
  // body end
}
__device__ __forceinline__ void esc_body_p4(const float* __restrict__ ANNZ, const int* __restrict__ Cols, const int* __restrict__ RPP, const int* __restrict__ NPP, const int* __restrict__ RowOff, const float* __restrict__ B, float* __restrict__ C, int N, int g, int i, int tid) {
  // body begin p4
  int ro0 = RowOff[4*g+0];
  int ro1 = RowOff[4*g+1];
  int ro2 = RowOff[4*g+2];
  int ro3 = RowOff[4*g+3];
  for (int j = 0; j < N; j += 32) {
    float c00 = 0.0f;
    float c10 = 0.0f;
    float c20 = 0.0f;
    float c30 = 0.0f;
    int t_nnz = NPP[g];
    for (int k = RPP[g]; k < RPP[g+1]; k += 2) {
      int br0 = Cols[k+0];
      int br1 = Cols[k+1];
      c00 += ANNZ[t_nnz+0] * ldB(B, br0, j+tid, N);
      c10 += ANNZ[t_nnz+1] * ldB(B, br0, j+tid, N);
      c20 += ANNZ[t_nnz+2] * ldB(B, br0, j+tid, N);
      c30 += ANNZ[t_nnz+3] * ldB(B, br0, j+tid, N);
      c00 += ANNZ[t_nnz+4] * ldB(B, br1, j+tid, N);
      c10 += ANNZ[t_nnz+5] * ldB(B, br1, j+tid, N);
      c20 += ANNZ[t_nnz+6] * ldB(B, br1, j+tid, N);
      c30 += ANNZ[t_nnz+7] * ldB(B, br1, j+tid, N);
      t_nnz += 8;
    }
    flush(C, i+ro0, j+tid, N, c00);
    flush(C, i+ro1, j+tid, N, c10);
    flush(C, i+ro2, j+tid, N, c20);
    flush(C, i+ro3, j+tid, N, c30);
  }
  // body end
}

extern "C" __global__ void spmm_esc(const float* __restrict__ ANNZ, const int* __restrict__ Cols, const int* __restrict__ RPP, const int* __restrict__ NPP, const int* __restrict__ RowOff, const unsigned* __restrict__ patterns, int num_patterns, const float* __restrict__ B, float* __restrict__ C, int N) {
  const int g = blockIdx.x;
  if (RPP[g] == RPP[g + 1]) return;
  const int i = (g / num_patterns) * ESC_UFI;
  const unsigned pattern = patterns[g % num_patterns];
  const int tid = threadIdx.x;
  switch (esc_popcount(pattern)) {
    case 1: esc_body_p1(ANNZ, Cols, RPP, NPP, RowOff, B, C, N, g, i, tid); break;
    case 2: esc_body_p2(ANNZ, Cols, RPP, NPP, RowOff, B, C, N, g, i, tid); break;
    case 3: esc_body_p3(ANNZ, Cols, RPP, NPP, RowOff, B, C, N, g, i, tid); break;
    case 4: esc_body_p4(ANNZ, Cols, RPP, NPP, RowOff, B, C, N, g, i, tid); break;
    default: break;
  }
}
