/*
 * Copyright (c) hetcc contributors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "c_sources.hpp"

namespace hetcc::csrc {

const char* const kRuntimeHeader = R"C(/* Helpers shared by generated layers. */
#ifndef HETCC_RUNTIME_H
#define HETCC_RUNTIME_H

#include <stdint.h>
#include <string.h>

#include "match_api.h"

static inline int64_t hetcc_wrap32(int64_t v) {
  uint32_t u = (uint32_t)(uint64_t)v;
  return u >= 0x80000000u ? (int64_t)u - 4294967296LL : (int64_t)u;
}

static inline int64_t hetcc_wrap8(int64_t v) {
  uint8_t u = (uint8_t)(uint64_t)v;
  return u >= 0x80u ? (int64_t)u - 256 : (int64_t)u;
}

/* Arithmetic shift rounding toward minus infinity. */
static inline int64_t hetcc_fshr(int64_t v, int64_t s) { return v >= 0 ? v >> s : -((-(v + 1)) >> s) - 1; }

typedef void (*hetcc_copy_fn)(void*, const void*, unsigned, unsigned, unsigned, unsigned);

/* Temporal loops, innermost first. */
typedef struct {
  int n;
  const int64_t* radix;
  const int* dim;
  const int64_t* stride; /* elements of `dim` advanced per step */
} hetcc_nest;

static inline void hetcc_origin(const hetcc_nest* L, const int64_t* it, int from, int64_t org[6]) {
  int q;
  for (q = 0; q < 6; ++q) org[q] = 0;
  for (q = from; q < L->n; ++q) org[L->dim[q]] += it[q] * L->stride[q];
}

/* Position of the current tile among the tiles of loops >= from. */
static inline int64_t hetcc_linear(const hetcc_nest* L, const int64_t* it, int from) {
  int64_t t = 0;
  int q;
  for (q = L->n - 1; q >= from; --q) t = t * L->radix[q] + it[q];
  return t;
}

static inline void hetcc_next(const hetcc_nest* L, const int64_t* it, int from, int64_t* nx) {
  int q;
  for (q = 0; q < L->n; ++q) nx[q] = it[q];
  for (q = from; q < L->n; ++q) {
    if (++nx[q] < L->radix[q]) return;
    nx[q] = 0;
  }
}

/* Canonical (channel, row, column) box of an operand tile. Input boxes are
 * clipped to the tensor, so they may be empty. */
static inline void hetcc_box(const match_layer_ctx* k, int op, const int64_t org[6], const int64_t t[6],
                             int64_t bo[3], int64_t be[3]) {
  bo[0] = bo[1] = bo[2] = 0;
  be[0] = be[1] = be[2] = 1;
  if (k->kind == 3) {
    bo[0] = org[0], bo[1] = org[2], bo[2] = org[3];
    be[0] = t[0], be[1] = t[2], be[2] = t[3];
    return;
  }
  if (op == 2) {
    bo[0] = org[0], be[0] = t[0];
    if (k->kind != 2) bo[1] = org[2], bo[2] = org[3], be[1] = t[2], be[2] = t[3];
    return;
  }
  if (op == 1) {
    bo[0] = org[0], be[0] = t[0];
    return;
  }
  if (k->kind == 2) {
    bo[0] = org[1], be[0] = t[1];
    return;
  }
  {
    int64_t y0 = org[2] * k->sy - k->pad_top + org[4] * k->dy;
    int64_t y1 = y0 + (t[2] - 1) * k->sy + (t[4] - 1) * k->dy + 1;
    int64_t x0 = org[3] * k->sx - k->pad_left + org[5] * k->dx;
    int64_t x1 = x0 + (t[3] - 1) * k->sx + (t[5] - 1) * k->dx + 1;
    if (y0 < 0) y0 = 0;
    if (x0 < 0) x0 = 0;
    if (y1 > k->IY) y1 = k->IY;
    if (x1 > k->IX) x1 = k->IX;
    bo[0] = k->kind == 1 ? org[0] : org[1];
    be[0] = k->kind == 1 ? t[0] : t[1];
    bo[1] = y0, be[1] = y1 > y0 ? y1 - y0 : 0;
    bo[2] = x0, be[2] = x1 > x0 ? x1 - x0 : 0;
  }
}

/* A box in storage order inside its whole tensor. */
typedef struct {
  int rank;
  int64_t full[3], org[3], ext[3];
  int es;
} hetcc_region;

static inline void hetcc_region_of(const match_layer_ctx* k, int op, const int64_t bo[3], const int64_t be[3],
                                   hetcc_region* r) {
  const int64_t K = k->dims[0], C = k->dims[1], OY = k->dims[2], OX = k->dims[3];
  int64_t ch, H, W;
  r->es = op == 0 ? k->i_es : op == 1 ? k->w_es : k->o_es;
  if (op == 1 && k->kind != 3) {
    int64_t per = k->kind == 2 ? C : C * k->dims[4] * k->dims[5];
    r->rank = 1;
    r->full[0] = K * per, r->org[0] = bo[0] * per, r->ext[0] = be[0] * per;
    return;
  }
  if (k->kind == 2) {
    r->rank = 1;
    r->full[0] = op == 0 ? C : K, r->org[0] = bo[0], r->ext[0] = be[0];
    return;
  }
  ch = (op == 0 && k->kind == 0) ? C : K;
  H = (op == 0 && k->kind != 3) ? k->IY : OY;
  W = (op == 0 && k->kind != 3) ? k->IX : OX;
  r->rank = 3;
  if (k->act_nhwc) {
    r->full[0] = H, r->full[1] = W, r->full[2] = ch;
    r->org[0] = bo[1], r->org[1] = bo[2], r->org[2] = bo[0];
    r->ext[0] = be[1], r->ext[1] = be[2], r->ext[2] = be[0];
  } else {
    r->full[0] = ch, r->full[1] = H, r->full[2] = W;
    memcpy(r->org, bo, sizeof r->org);
    memcpy(r->ext, be, sizeof r->ext);
  }
}

/* Moves a region between its tensor and a packed L1 buffer. The dimension
 * above the innermost contiguous run is handed to the 2-D copy. */
static inline void hetcc_copy(hetcc_copy_fn fn, void* l1, const void* l2, const hetcc_region* r, int to_l1) {
  const int R = r->rank;
  int64_t ps[3], run, chunks, sstride, n_outer = 1, o;
  int j, k;
  for (j = 0; j < R; ++j)
    if (r->ext[j] <= 0) return;
  ps[R - 1] = 1;
  for (j = R - 2; j >= 0; --j) ps[j] = ps[j + 1] * r->full[j + 1];
  k = R - 1;
  while (k > 0 && r->ext[k] == r->full[k]) --k;
  run = r->ext[k] * ps[k];
  chunks = k > 0 ? r->ext[k - 1] : 1;
  sstride = k > 0 ? ps[k - 1] : 0;
  for (j = 0; j < k - 1; ++j) n_outer *= r->ext[j];
  for (o = 0; o < n_outer; ++o) {
    int64_t rem = o, src = 0;
    char* a = (char*)l1 + o * chunks * run * r->es;
    const char* b;
    for (j = k - 2; j >= 0; --j) {
      src += (r->org[j] + rem % r->ext[j]) * ps[j];
      rem /= r->ext[j];
    }
    for (j = k > 0 ? k - 1 : 0; j < R; ++j) src += r->org[j] * ps[j];
    b = (const char*)l2 + src * r->es;
    if (to_l1)
      fn(a, b, (unsigned)(run * r->es), (unsigned)chunks, (unsigned)(sstride * r->es), (unsigned)(run * r->es));
    else
      fn((void*)b, a, (unsigned)(run * r->es), (unsigned)chunks, (unsigned)(run * r->es),
         (unsigned)(sstride * r->es));
  }
}

static inline void hetcc_fetch(hetcc_copy_fn fn, const match_layer_ctx* k, int op, void* l1, const void* l2,
                               const hetcc_nest* L, const int64_t* it, int from, const int64_t t[6], int64_t bo[3],
                               int64_t be[3]) {
  int64_t org[6];
  hetcc_region r;
  hetcc_origin(L, it, from, org);
  hetcc_box(k, op, org, t, bo, be);
  hetcc_region_of(k, op, bo, be, &r);
  hetcc_copy(fn, l1, l2, &r, 1);
}

static inline void hetcc_store(hetcc_copy_fn fn, const match_layer_ctx* k, const void* l1, void* l2,
                               const int64_t bo[3], const int64_t be[3]) {
  hetcc_region r;
  hetcc_region_of(k, 2, bo, be, &r);
  hetcc_copy(fn, (void*)l1, l2, &r, 0);
}

#endif
)C";

const char* const kApiPrelude = R"C(/* Generic layer API. */
#ifndef MATCH_API_H
#define MATCH_API_H

#include <stdint.h>

/* Kernel context. Boxes are canonical (channel, row, column) origins and
 * extents of the tiles held by the L1 buffers; t_org/t_ext is the kernel
 * tile per loop dimension (K, C, OY, OX, FY, FX). */
typedef struct {
  int kind;     /* 0 conv, 1 depthwise, 2 dense, 3 add */
  int act_nhwc;
  int w_layout; /* 0 OIHW, 1 OHWI, 2 diana_kblock16, 3 ne16_cblock16, 4 [K][C] */
  int i_es, w_es, o_es;
  int64_t dims[6];
  int64_t IY, IX, sy, sx, dy, dx, pad_top, pad_left;
  const void* I;
  const void* W;
  void* O;
  void* scratch;
  int64_t i_org[3], i_ext[3], w_org[3], w_ext[3], o_org[3], o_ext[3];
  int64_t t_org[6], t_ext[6];
  int n_tail;
  int tail[3]; /* 1 bias_add, 2 requant, 3 relu */
  const void* bias;
  int bias_es;
  const int64_t* M;
  const int64_t* B;
  int64_t m_n, b_n, S, lo, hi;
} match_layer_ctx;

)C";

const char* const kBackendHeader = R"C(/* Host backend for generated layers. */
#ifndef MATCH_TEST_BACKEND_H
#define MATCH_TEST_BACKEND_H

#include "match_api.h"

/* Writes {layer: {operand: transfers}} to $HETCC_COUNTERS (default
 * match_counters.json). */
void match_test_backend_dump(void);

void hetcc_ref_kernel(const match_layer_ctx* k);

#endif
)C";

const char* const kBackendSource = R"C(/* Host implementation of the generic API: synchronous copies, naive
 * kernels and per-layer transfer counters. */
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "match_api.h"
#include "match_test_backend.h"

#define MAX_LAYERS 4096

static struct {
  const char* layer;
  long n[3];
} counters[MAX_LAYERS];
static int n_layers;
static int in_transfer;

static void die(const char* msg) {
  fprintf(stderr, "match backend: %s\n", msg);
  abort();
}

void match_platform_init(void) {}
void match_platform_close(void) {}

void* match_mem_alloc_l1(unsigned bytes) {
  void* p = malloc(bytes ? bytes : 1);
  if (!p) die("out of memory");
  return p;
}

void match_mem_free_l1(void* p) { free(p); }

void match_mem_copy(void* dst, const void* src, unsigned bytes, unsigned chunks, unsigned src_stride,
                    unsigned dst_stride) {
  unsigned i;
  if (!in_transfer) die("copy outside a transfer");
  for (i = 0; i < chunks; ++i) memcpy((char*)dst + (size_t)i * dst_stride, (const char*)src + (size_t)i * src_stride, bytes);
}

void match_mem_transfer_begin(const char* layer, int operand) {
  int i;
  if (in_transfer) die("nested transfer");
  if (operand < 0 || operand > 2) die("bad operand");
  for (i = n_layers - 1; i >= 0; --i)
    if (strcmp(counters[i].layer, layer) == 0) break;
  if (i < 0) {
    if (n_layers == MAX_LAYERS) die("too many layers");
    i = n_layers++;
    counters[i].layer = layer;
  }
  counters[i].n[operand]++;
  in_transfer = 1;
}

void match_mem_transfer_end(void) {
  if (!in_transfer) die("unbalanced transfer end");
  in_transfer = 0;
}

void match_sync_transfers(void) {}
void match_sync_compute(void) {}

void match_test_backend_dump(void) {
  const char* path = getenv("HETCC_COUNTERS");
  FILE* f = fopen(path && *path ? path : "match_counters.json", "w");
  int i;
  if (!f) die("cannot write counters");
  fprintf(f, "{");
  for (i = 0; i < n_layers; ++i)
    fprintf(f, "%s\"%s\": {\"I\": %ld, \"W\": %ld, \"O\": %ld}", i ? ", " : "", counters[i].layer, counters[i].n[0],
            counters[i].n[1], counters[i].n[2]);
  fprintf(f, "}\n");
  fclose(f);
}

static int64_t ld(const void* p, int es, int64_t i) {
  return es == 1 ? (int64_t)((const int8_t*)p)[i] : (int64_t)((const int32_t*)p)[i];
}

static void st(void* p, int es, int64_t i, int64_t v) {
  if (es == 1)
    ((int8_t*)p)[i] = (int8_t)v;
  else
    ((int32_t*)p)[i] = (int32_t)v;
}

static int64_t wrap32(int64_t v) {
  uint32_t u = (uint32_t)(uint64_t)v;
  return u >= 0x80000000u ? (int64_t)u - 4294967296LL : (int64_t)u;
}

static int64_t fshr(int64_t v, int64_t s) { return v >= 0 ? v >> s : -((-(v + 1)) >> s) - 1; }

static int64_t box_at(const int64_t o[3], const int64_t e[3], int nhwc, int64_t c, int64_t y, int64_t x) {
  c -= o[0], y -= o[1], x -= o[2];
  if (c < 0 || c >= e[0] || y < 0 || y >= e[1] || x < 0 || x >= e[2]) die("access outside the L1 tile");
  return nhwc ? (y * e[2] + x) * e[0] + c : (c * e[1] + y) * e[2] + x;
}

static int64_t w_at(const match_layer_ctx* k, int64_t kk, int64_t c, int64_t fy, int64_t fx) {
  const int64_t C = k->dims[1], FY = k->dims[4], FX = k->dims[5];
  kk -= k->w_org[0];
  if (kk < 0 || kk >= k->w_ext[0]) die("weight outside the L1 tile");
  switch (k->w_layout) {
    case 1: return ((kk * FY + fy) * FX + fx) * C + c;
    case 2: return ((((kk / 16) * C + c) * FY + fy) * FX + fx) * 16 + kk % 16;
    case 3: {
      int64_t cb0 = (c / 16) * 16, bw = C - cb0 < 16 ? C - cb0 : 16;
      return kk * C * FY * FX + cb0 * FY * FX + (fy * FX + fx) * bw + (c - cb0);
    }
    case 4: return kk * C + c;
    default: return ((kk * C + c) * FY + fy) * FX + fx;
  }
}

void hetcc_ref_kernel(const match_layer_ctx* k) {
  const int64_t* to = k->t_org;
  const int64_t* te = k->t_ext;
  const int64_t C = k->dims[1], FY = k->dims[4], FX = k->dims[5];
  int64_t kk, oy, ox, c, fy, fx;
  int j;
  for (kk = to[0]; kk < to[0] + te[0]; ++kk)
    for (oy = to[2]; oy < to[2] + te[2]; ++oy)
      for (ox = to[3]; ox < to[3] + te[3]; ++ox) {
        int64_t acc = 0, v;
        switch (k->kind) {
          case 0:
          case 1:
            for (c = 0; c < C; ++c)
              for (fy = 0; fy < FY; ++fy) {
                int64_t iy = oy * k->sy - k->pad_top + fy * k->dy;
                if (iy < 0 || iy >= k->IY) continue;
                for (fx = 0; fx < FX; ++fx) {
                  int64_t ix = ox * k->sx - k->pad_left + fx * k->dx;
                  int64_t ic = k->kind == 1 ? kk : c;
                  if (ix < 0 || ix >= k->IX) continue;
                  acc += ld(k->I, k->i_es, box_at(k->i_org, k->i_ext, k->act_nhwc, ic, iy, ix)) *
                         ld(k->W, k->w_es, w_at(k, kk, c, fy, fx));
                }
              }
            break;
          case 2:
            for (c = 0; c < C; ++c) {
              if (c - k->i_org[0] < 0 || c - k->i_org[0] >= k->i_ext[0]) die("input outside the L1 tile");
              acc += ld(k->I, k->i_es, c - k->i_org[0]) * ld(k->W, k->w_es, w_at(k, kk, c, 0, 0));
            }
            break;
          default:
            acc = ld(k->I, k->i_es, box_at(k->i_org, k->i_ext, k->act_nhwc, kk, oy, ox)) +
                  ld(k->W, k->w_es, box_at(k->w_org, k->w_ext, k->act_nhwc, kk, oy, ox));
            break;
        }
        v = wrap32(acc);
        for (j = 0; j < k->n_tail; ++j) {
          if (k->tail[j] == 1) {
            v = wrap32(v + ld(k->bias, k->bias_es, kk));
          } else if (k->tail[j] == 2) {
            int64_t m = k->M[k->m_n == 1 ? 0 : kk], b = k->B[k->b_n == 1 ? 0 : kk];
            v = fshr(v * m + b, k->S);
            v = v < k->lo ? k->lo : v > k->hi ? k->hi : v;
          } else if (v < 0) {
            v = 0;
          }
        }
        if (k->kind == 2) {
          if (kk - k->o_org[0] < 0 || kk - k->o_org[0] >= k->o_ext[0]) die("output outside the L1 tile");
          st(k->O, k->o_es, kk - k->o_org[0], v);
        } else {
          st(k->O, k->o_es, box_at(k->o_org, k->o_ext, k->act_nhwc, kk, oy, ox), v);
        }
      }
}
)C";

}  // namespace hetcc::csrc
