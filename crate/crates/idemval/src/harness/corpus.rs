//! The kernel corpus: a fixed set of kernels spanning every verdict class
//! and miss bucket, plus seeded instance families for each.
//!
//! Generation is fully deterministic in the seed. Each conditional kernel
//! gets both disjoint (idempotent) and aliased (non-idempotent) launches;
//! the miss-bucket kernels (gather, masked update, strides, indirect calls,
//! data-bound loops, store-then-load) produce launches that execute
//! idempotently but that the validator must conservatively reject. Instances
//! stay small (at most 64 threads) so the concrete oracle can trace all of
//! them in seconds; the benchmark builds its own large launches.
//!
//! On disk a corpus is `<dir>/<kernel>.gk` plus `<dir>/<kernel>.instances.json`,
//! regenerable byte-identically from the seed.

use std::fs;
use std::io;
use std::path::Path;

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{parse_kernel, pretty_print, IrError, Kernel};
use crate::oracle::MemoryImage;
use crate::validator::Instance;

pub const DEFAULT_CORPUS_SEED: u64 = 0xa5eed;

/// Seeded fill of the buffer passed as argument `arg`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fill {
    pub arg: usize,
    pub len: u64,
    pub seed: u64,
}

/// One stored launch: arguments, dimensions, initial memory, and the
/// synthetic workload model the case studies consume (execution time,
/// checkpointable input size, preemption context size). The model numbers
/// describe the GPU workload an instance stands in for; they are
/// deliberately much larger than the tiny oracle images.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub args: Vec<i64>,
    pub gdim: u32,
    pub bdim: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fills: Vec<Fill>,
    pub exec_time_ns: u64,
    pub input_bytes: u64,
    pub context_bytes: u64,
}

impl InstanceSpec {
    pub fn instance(&self, kernel: &str) -> Instance {
        Instance {
            kernel: kernel.to_string(),
            args: self.args.clone(),
            gdim: self.gdim,
            bdim: self.bdim,
        }
    }

    /// Initial memory for this launch: every fill applied at the buffer the
    /// indexed argument points to.
    pub fn image(&self) -> MemoryImage {
        let mut m = MemoryImage::new();
        for f in &self.fills {
            m.fill_seeded(self.args[f.arg] as u64, f.len, f.seed);
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct CorpusKernel {
    pub kernel: Kernel,
    pub specs: Vec<InstanceSpec>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub kernels: Vec<CorpusKernel>,
}

impl Corpus {
    pub fn total_instances(&self) -> usize {
        self.kernels.iter().map(|k| k.specs.len()).sum()
    }

    pub fn find(&self, name: &str) -> Option<&CorpusKernel> {
        self.kernels.iter().find(|k| k.kernel.name == name)
    }
}

#[derive(Debug, Error)]
pub enum CorpusIoError {
    #[error("{path}: {err}")]
    Io { path: String, err: io::Error },
    #[error("{path}: {err}")]
    Parse { path: String, err: IrError },
    #[error("{path}: {err}")]
    Json { path: String, err: serde_json::Error },
    #[error("no kernels found in `{0}`")]
    Empty(String),
}

/// How an instance family relates its output pointer to its inputs.
enum Alias {
    /// All buffers distinct.
    None,
    /// Output equals the input at this argument index.
    Full(usize),
    /// Output equals that input shifted by 256 bytes (stays aligned).
    Shifted(usize),
}

struct Gen {
    rng: ChaCha8Rng,
    next_slot: u64,
}

impl Gen {
    fn new(seed: u64, kernel_index: u64) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(
                seed.wrapping_add(kernel_index.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
            ),
            next_slot: 0,
        }
    }

    /// Next buffer base from a rotating pool: 1 MiB apart, 256-aligned, far
    /// exceeding any oracle instance footprint.
    fn base(&mut self) -> i64 {
        let b = 0x1000_0000 + (self.next_slot % 256) as i64 * 0x10_0000;
        self.next_slot += 1;
        b
    }

    fn pick(&mut self, choices: &[u32]) -> u32 {
        choices[(self.rng.next_u32() as usize) % choices.len()]
    }

    /// Grid/block dims with at most `cap` threads total.
    fn dims(&mut self, cap: u32) -> (u32, u32) {
        let gdim = self.pick(&[1, 1, 2, 4]);
        let max_b = (cap / gdim).max(1);
        let bdim = self.pick(&[1, 2, 4, 8, 16]).min(max_b);
        (gdim, bdim)
    }

    fn seed(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Synthetic workload model: execution time 0.5–20 ms, checkpointable
    /// input 1–64 MiB, preemption context sized for a 4–98 µs save at
    /// 100 GB/s. Integer-only so regeneration is bit-stable everywhere.
    fn model(&mut self) -> (u64, u64, u64) {
        let exec = 500_000 * (1 + (self.rng.next_u64() % 40));
        let input = (1 << 20) * (1 + (self.rng.next_u64() % 64));
        let context = 400_000 + self.rng.next_u64() % 9_400_000;
        (exec, input, context)
    }

    fn spec(
        &mut self,
        args: Vec<i64>,
        gdim: u32,
        bdim: u32,
        fill_args: &[(usize, u64)],
    ) -> InstanceSpec {
        let fills = fill_args
            .iter()
            .map(|&(arg, len)| Fill { arg, len, seed: self.seed() })
            .collect();
        let (exec_time_ns, input_bytes, context_bytes) = self.model();
        InstanceSpec { args, gdim, bdim, fills, exec_time_ns, input_bytes, context_bytes }
    }
}

/// Output base for a pair family: argument 0 is the written buffer, the
/// rest are read. Aliasing rewrites argument 0 onto one of the inputs.
fn pair_args(g: &mut Gen, n_bufs: usize, alias: &Alias, extra: &[i64]) -> Vec<i64> {
    let mut args: Vec<i64> = (0..n_bufs).map(|_| g.base()).collect();
    match *alias {
        Alias::None => {}
        Alias::Full(i) => args[0] = args[i],
        Alias::Shifted(i) => args[0] = args[i] + 0x100,
    }
    args.extend_from_slice(extra);
    args
}

struct Family {
    name: &'static str,
    source: &'static str,
    build: fn(&mut Gen) -> Vec<InstanceSpec>,
}

const FAMILIES: &[Family] = &[
    Family {
        name: "vectorSet",
        source: "kernel vectorSet(A: buf) {\n  store [A + 8 * (bid * bdim + tid)] = 7 :8\n}",
        build: |g| {
            (0..200)
                .map(|_| {
                    let (gd, bd) = g.dims(64);
                    let a = g.base();
                    g.spec(vec![a], gd, bd, &[])
                })
                .collect()
        },
    },
    Family {
        name: "vectorInc",
        source: "kernel vectorInc(X: buf) {\n  let v = load [X + 8 * (bid * bdim + tid)] :8\n  store [X + 8 * (bid * bdim + tid)] = v + 1 :8\n}",
        build: |g| {
            (0..16)
                .map(|_| {
                    let (gd, bd) = g.dims(64);
                    let x = g.base();
                    g.spec(vec![x], gd, bd, &[(0, 512)])
                })
                .collect()
        },
    },
    Family {
        name: "vectorAdd",
        source: "kernel vectorAdd(A: buf, B: buf, C: buf) {\n  let idx = bid * bdim + tid\n  let b = load [B + 4 * idx] :4\n  let c = load [C + 4 * idx] :4\n  store [A + 4 * idx] = b + c :4\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..200 {
                let alias = match i % 25 {
                    22 => Alias::Full(1),
                    23 => Alias::Full(2),
                    24 => Alias::Shifted(2),
                    _ => Alias::None,
                };
                let (gd, bd) = g.dims(64);
                let args = pair_args(g, 3, &alias, &[]);
                out.push(g.spec(args, gd, bd, &[(1, 512), (2, 512)]));
            }
            out
        },
    },
    Family {
        name: "elemwise_relu",
        source: "kernel elemwise_relu(A: buf, B: buf, N: i64) {\n  for i in 0 .. N {\n    let a = load [A + 4 * ((bid * bdim + tid) * N + i)] :4\n    store [B + 4 * ((bid * bdim + tid) * N + i)] = max(a, 0) :4\n  }\n}",
        build: |g| {
            // Writes B, reads A: argument 0 of the pair is B here.
            let mut out = Vec::new();
            for i in 0..48 {
                let (n, alias) = match i % 8 {
                    0 => (8, Alias::None),
                    1 => (16, Alias::None),
                    2 => (32, Alias::None),
                    3 => (8, Alias::None),
                    4 => (16, Alias::None),
                    5 | 6 => (64, Alias::None),
                    _ => (16, Alias::Full(1)),
                };
                let gd = 1;
                let bd = g.pick(&[1, 2, 4]);
                let mut args = pair_args(g, 2, &alias, &[n]);
                // Source order is (A, B, N) with B written: swap into place.
                args.swap(0, 1);
                out.push(g.spec(args, gd, bd, &[(0, 2048)]));
            }
            out
        },
    },
    Family {
        name: "axpy",
        source: "kernel axpy(Z: buf, X: buf, Y: buf, a: i64) {\n  let i = bid * bdim + tid\n  let x = load [X + 8 * i] :8\n  let y = load [Y + 8 * i] :8\n  store [Z + 8 * i] = a * x + y :8\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..100 {
                let alias = match i % 20 {
                    17 => Alias::Full(1),
                    18 => Alias::Full(2),
                    19 => Alias::Shifted(2),
                    _ => Alias::None,
                };
                let (gd, bd) = g.dims(64);
                let a_scalar = 1 + 2 * (g.rng.next_u64() % 8) as i64;
                let args = pair_args(g, 3, &alias, &[a_scalar]);
                out.push(g.spec(args, gd, bd, &[(1, 512), (2, 512)]));
            }
            out
        },
    },
    Family {
        name: "stride_even_odd",
        source: "kernel stride_even_odd(X: buf) {\n  let i = bid * bdim + tid\n  let v = load [X + 8 * (2 * i + 1)] :8\n  store [X + 8 * (2 * i)] = v + 1 :8\n}",
        build: |g| {
            (0..16)
                .map(|_| {
                    let (gd, bd) = g.dims(32);
                    let x = g.base();
                    g.spec(vec![x], gd, bd, &[(0, 1024)])
                })
                .collect()
        },
    },
    Family {
        name: "gather",
        source: "kernel gather(Y: buf, X: buf, I: buf) {\n  let j = load [I + 8 * tid] :8\n  let v = load [X + 8 * j] :8\n  store [Y + 8 * tid] = v :8\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..20 {
                let alias = if i % 5 == 4 { Alias::Full(2) } else { Alias::None };
                let bd = g.pick(&[2, 4, 8]);
                let args = pair_args(g, 3, &alias, &[]);
                out.push(g.spec(args, 1, bd, &[(1, 512), (2, 512)]));
            }
            out
        },
    },
    Family {
        name: "masked_update",
        source: "kernel masked_update(F: buf) {\n  let c = load [F + 8 * tid] :8\n  if c == 1 {\n    store [F + 8 * tid + 8] = c + 1 :8\n  }\n}",
        build: |g| {
            (0..16)
                .map(|_| {
                    let bd = g.pick(&[2, 4, 8, 16]);
                    let f = g.base();
                    g.spec(vec![f], 1, bd, &[(0, 1024)])
                })
                .collect()
        },
    },
    Family {
        name: "dead_indirect",
        source: "kernel dead_indirect(X: buf, n: i64) {\n  store [X + 8 * tid] = n :8\n  if n < 0 {\n    call_indirect n\n  }\n}",
        build: |g| {
            (0..14)
                .map(|_| {
                    let bd = g.pick(&[1, 2, 4, 8]);
                    let x = g.base();
                    let n = (g.rng.next_u64() % 1000) as i64;
                    g.spec(vec![x, n], 1, bd, &[])
                })
                .collect()
        },
    },
    Family {
        name: "data_bound_loop",
        // Trip count comes from memory; `& 7` keeps concrete execution
        // short, but the analysis already gave up at the while head.
        source: "kernel data_bound_loop(X: buf, L: buf) {\n  let n = load [L] :8\n  let i = 0\n  while i < (n & 7) {\n    store [X + 8 * i] = i + 1 :8\n    let i = i + 1\n  }\n}",
        build: |g| {
            (0..12)
                .map(|_| {
                    let (gd, bd) = g.dims(16);
                    let x = g.base();
                    let l = g.base();
                    g.spec(vec![x, l], gd, bd, &[(1, 8)])
                })
                .collect()
        },
    },
    Family {
        name: "atomic_hist",
        source: "kernel atomic_hist(H: buf, X: buf) {\n  let v = load [X + 8 * (bid * bdim + tid)] :8\n  atomic_add [H + 8 * (v & 7)] += 1 :8\n}",
        build: |g| {
            (0..10)
                .map(|_| {
                    let (gd, bd) = g.dims(64);
                    let h = g.base();
                    let x = g.base();
                    g.spec(vec![h, x], gd, bd, &[(1, 512)])
                })
                .collect()
        },
    },
    Family {
        name: "write_then_read",
        source: "kernel write_then_read(X: buf) {\n  store [X + 8 * tid] = 5 :8\n  let v = load [X + 8 * tid] :8\n  store [X + 8 * tid] = v + 1 :8\n}",
        build: |g| {
            (0..12)
                .map(|_| {
                    let bd = g.pick(&[1, 2, 4, 8, 16]);
                    let x = g.base();
                    g.spec(vec![x], 1, bd, &[])
                })
                .collect()
        },
    },
    Family {
        name: "matrix_tile",
        source: "@require W >= 1\n@require W <= 16\nkernel matrix_tile(O: buf, I: buf, W: i64) {\n  for r in 0 .. 4 {\n    let idx = bid * W + tid * 4 + r\n    let v = load [I + 8 * idx] :8\n    store [O + 8 * idx] = v + 1 :8\n  }\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..60 {
                let alias = if i % 6 == 5 { Alias::Full(1) } else { Alias::None };
                let gd = g.pick(&[1, 2, 4]);
                let bd = g.pick(&[1, 2, 4, 8, 16]);
                let w = g.pick(&[8, 16]) as i64;
                let args = pair_args(g, 2, &alias, &[w]);
                out.push(g.spec(args, gd, bd, &[(1, 2048)]));
            }
            out
        },
    },
    Family {
        name: "strider",
        source: "@require S >= 1\n@require S <= 4\nkernel strider(Y: buf, X: buf, S: i64) {\n  let i = bid * bdim + tid\n  let v = load [X + 8 * (S * i)] :8\n  store [Y + 8 * (S * i)] = v + 3 :8\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..60 {
                let alias = if i % 6 == 5 { Alias::Full(1) } else { Alias::None };
                let gd = g.pick(&[1, 2]);
                let bd = g.pick(&[1, 2, 4, 8, 16]);
                let s = g.pick(&[1, 2, 3, 4]) as i64;
                let args = pair_args(g, 2, &alias, &[s]);
                out.push(g.spec(args, gd, bd, &[(1, 1024)]));
            }
            out
        },
    },
    Family {
        name: "reverse_iter",
        source: "kernel reverse_iter(A: buf, B: buf, N: i64) {\n  for i in 0 .. N {\n    let v = load [B + 8 * ((N - 1) - i)] :8\n    store [A + 8 * ((N - 1) - i)] = v + 1 :8\n  }\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..50 {
                let (n, alias) = match i % 25 {
                    21 | 22 => (40, Alias::None),
                    23 | 24 => (8, Alias::Full(1)),
                    _ => (if i % 2 == 0 { 4 } else { 8 }, Alias::None),
                };
                let args = pair_args(g, 2, &alias, &[n]);
                let bd = g.pick(&[1, 2]);
                out.push(g.spec(args, 1, bd, &[(1, 512)]));
            }
            out
        },
    },
    Family {
        name: "mod_hash",
        source: "@require M >= 1\n@require M <= 64\nkernel mod_hash(X: buf, M: i64) {\n  let v = load [X + 8 * (tid % M)] :8\n  store [X + 128 + 8 * (tid % M)] = v + 1 :8\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..20 {
                // Small moduli keep the ranges provably disjoint; M = 32
                // overlaps the 128-byte shift and trips the range check even
                // though the concrete bytes never conflict.
                let m = if i % 5 == 4 { 32 } else { g.pick(&[4, 8, 16]) as i64 };
                let bd = if m == 32 { 40 } else { g.pick(&[8, 16]) };
                let x = g.base();
                out.push(g.spec(vec![x, m], 1, bd, &[(0, 512)]));
            }
            out
        },
    },
    Family {
        name: "and_mask",
        source: "kernel and_mask(X: buf, Y: buf) {\n  let v = load [Y + 8 * (tid & 7)] :8\n  store [X + 8 * (tid & 7)] = v + 1 :8\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..40 {
                let alias = if i % 5 == 4 { Alias::Full(1) } else { Alias::None };
                let bd = g.pick(&[4, 8, 16, 32]);
                let args = pair_args(g, 2, &alias, &[]);
                out.push(g.spec(args, 1, bd, &[(1, 128)]));
            }
            out
        },
    },
    Family {
        name: "opaque_ptr",
        // The store target is loaded data: unbounded, so the write
        // descriptor is opaque. Concretely the seeded pointers scatter far
        // from the table being read, so execution stays idempotent.
        source: "kernel opaque_ptr(T: buf, X: buf) {\n  let p = load [T + 8 * tid] :8\n  store [X + p] = p + 1 :8\n}",
        build: |g| {
            (0..10)
                .map(|_| {
                    let bd = g.pick(&[2, 4, 8]);
                    let t = g.base();
                    let x = g.base();
                    g.spec(vec![t, x], 1, bd, &[(0, 512)])
                })
                .collect()
        },
    },
    Family {
        name: "guard_flag",
        source: "kernel guard_flag(X: buf, Y: buf, flag: i64) {\n  let i = bid * bdim + tid\n  if flag == 1 {\n    let v = load [Y + 8 * i] :8\n    store [X + 8 * i] = v + 1 :8\n  }\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..50 {
                // Disabled aliased launches are still idempotent: the guard
                // proves no byte is touched.
                let (flag, alias) = match i % 10 {
                    7 | 8 => (0, Alias::Full(1)),
                    9 => (1, Alias::Full(1)),
                    _ => (1, Alias::None),
                };
                let (gd, bd) = g.dims(64);
                let args = pair_args(g, 2, &alias, &[flag]);
                out.push(g.spec(args, gd, bd, &[(1, 512)]));
            }
            out
        },
    },
    Family {
        name: "copy_scale",
        source: "kernel copy_scale(D: buf, S: buf, k: i64) {\n  let i = bid * bdim + tid\n  let v = load [S + 4 * i] :4\n  store [D + 4 * i] = v + k :4\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..60 {
                let alias = if i % 6 == 5 { Alias::Full(1) } else { Alias::None };
                let (gd, bd) = g.dims(64);
                let k = 1 + (g.rng.next_u64() % 100) as i64;
                let args = pair_args(g, 2, &alias, &[k]);
                out.push(g.spec(args, gd, bd, &[(1, 512)]));
            }
            out
        },
    },
    Family {
        name: "probe_read",
        source: "kernel probe_read(X: buf) {\n  let v = load [X + 8 * (bid * bdim + tid)] :8\n}",
        build: |g| {
            (0..80)
                .map(|_| {
                    let (gd, bd) = g.dims(64);
                    let x = g.base();
                    g.spec(vec![x], gd, bd, &[(0, 512)])
                })
                .collect()
        },
    },
    Family {
        name: "two_phase",
        source: "kernel two_phase(X: buf) {\n  let i = bid * bdim + tid\n  store [X + 8 * i] = 1 :8\n  store [X + 8 * i] = 2 :8\n}",
        build: |g| {
            (0..80)
                .map(|_| {
                    let (gd, bd) = g.dims(64);
                    let x = g.base();
                    g.spec(vec![x], gd, bd, &[])
                })
                .collect()
        },
    },
    Family {
        name: "min_max_clamp",
        source: "kernel min_max_clamp(X: buf, Y: buf) {\n  let i = bid * bdim + tid\n  let v = load [Y + 8 * max(i - 7, 0)] :8\n  store [X + 8 * min(i, 7)] = v + 1 :8\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..40 {
                let alias = if i % 5 == 4 { Alias::Full(1) } else { Alias::None };
                let (gd, bd) = g.dims(64);
                let args = pair_args(g, 2, &alias, &[]);
                out.push(g.spec(args, gd, bd, &[(1, 512)]));
            }
            out
        },
    },
    Family {
        name: "halo_shift",
        source: "kernel halo_shift(Y: buf, X: buf) {\n  let i = bid * bdim + tid\n  let v = load [X + 8 * (i + 1)] :8\n  store [Y + 8 * i] = v + 1 :8\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..40 {
                let alias = if i % 5 == 4 { Alias::Full(1) } else { Alias::None };
                let (gd, bd) = g.dims(64);
                let args = pair_args(g, 2, &alias, &[]);
                out.push(g.spec(args, gd, bd, &[(1, 1024)]));
            }
            out
        },
    },
    Family {
        name: "bcast_read",
        source: "kernel bcast_read(X: buf, C: buf) {\n  let v = load [C] :8\n  store [X + 8 * (bid * bdim + tid)] = v + 1 :8\n}",
        build: |g| {
            let mut out = Vec::new();
            for i in 0..40 {
                let alias = if i % 5 == 4 { Alias::Full(1) } else { Alias::None };
                let (gd, bd) = g.dims(64);
                let args = pair_args(g, 2, &alias, &[]);
                out.push(g.spec(args, gd, bd, &[(1, 8)]));
            }
            out
        },
    },
    Family {
        name: "triangle_pe",
        // Nine independent branches: 512 paths, past the exploration budget.
        source: "kernel triangle_pe(X: buf, n: i64) {\n  if n & 1 == 1 {\n    store [X] = 1 :8\n  }\n  if n & 2 == 2 {\n    store [X + 8] = 1 :8\n  }\n  if n & 4 == 4 {\n    store [X + 16] = 1 :8\n  }\n  if n & 8 == 8 {\n    store [X + 24] = 1 :8\n  }\n  if n & 16 == 16 {\n    store [X + 32] = 1 :8\n  }\n  if n & 32 == 32 {\n    store [X + 40] = 1 :8\n  }\n  if n & 64 == 64 {\n    store [X + 48] = 1 :8\n  }\n  if n & 128 == 128 {\n    store [X + 56] = 1 :8\n  }\n  if n & 256 == 256 {\n    store [X + 64] = 1 :8\n  }\n}",
        build: |g| {
            (0..10)
                .map(|_| {
                    let x = g.base();
                    let n = (g.rng.next_u64() % 512) as i64;
                    let bd = g.pick(&[1, 2, 4]);
                    g.spec(vec![x, n], 1, bd, &[])
                })
                .collect()
        },
    },
    Family {
        name: "empty",
        source: "kernel empty() {}",
        build: |g| {
            (0..6)
                .map(|_| {
                    let gd = g.pick(&[1, 2]);
                    let bd = g.pick(&[1, 4, 16]);
                    g.spec(vec![], gd, bd, &[])
                })
                .collect()
        },
    },
];

/// Build the full corpus for a seed. Deterministic: the same seed yields the
/// same kernels, instances, fills, and workload models, bit for bit.
pub fn generate_corpus(seed: u64) -> Corpus {
    let kernels = FAMILIES
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let kernel = parse_kernel(f.source)
                .unwrap_or_else(|e| panic!("corpus kernel `{}` does not parse: {e}", f.name));
            assert_eq!(kernel.name, f.name);
            let mut g = Gen::new(seed, i as u64);
            CorpusKernel { kernel, specs: (f.build)(&mut g) }
        })
        .collect();
    Corpus { kernels }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    kernel: String,
    instances: Vec<InstanceSpec>,
}

/// Write `<dir>/<kernel>.gk` and `<dir>/<kernel>.instances.json` for every
/// kernel. Sources go through the canonical printer, so files are stable.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for k in &corpus.kernels {
        let name = &k.kernel.name;
        fs::write(dir.join(format!("{name}.gk")), pretty_print(&k.kernel))?;
        let file = InstanceFile { kernel: name.clone(), instances: k.specs.clone() };
        let mut json = serde_json::to_string_pretty(&file).expect("corpus serializes");
        json.push('\n');
        fs::write(dir.join(format!("{name}.instances.json")), json)?;
    }
    Ok(())
}

/// Load a corpus directory: every `.gk` with its `.instances.json` (missing
/// instance files mean an empty family). Kernels come back sorted by file
/// name, so reports are reproducible.
pub fn load_corpus(dir: &Path) -> Result<Corpus, CorpusIoError> {
    let at = |p: &Path| p.display().to_string();
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|err| CorpusIoError::Io { path: at(dir), err })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "gk"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CorpusIoError::Empty(at(dir)));
    }
    let mut kernels = Vec::new();
    for p in paths {
        let src = fs::read_to_string(&p).map_err(|err| CorpusIoError::Io { path: at(&p), err })?;
        let kernel = parse_kernel(&src).map_err(|err| CorpusIoError::Parse { path: at(&p), err })?;
        let ip = p.with_extension("instances.json");
        let specs = if ip.exists() {
            let text =
                fs::read_to_string(&ip).map_err(|err| CorpusIoError::Io { path: at(&ip), err })?;
            let file: InstanceFile = serde_json::from_str(&text)
                .map_err(|err| CorpusIoError::Json { path: at(&ip), err })?;
            file.instances
        } else {
            Vec::new()
        };
        kernels.push(CorpusKernel { kernel, specs });
    }
    Ok(Corpus { kernels })
}
