//! Quasi-cyclic LDPC codes: alist loading, systematic encoding via one-time
//! GF(2) elimination, and flooding-schedule sum-product belief propagation.

use crate::{Error, Result, LLR_MAX};

/// Binary parity-check code loaded from an alist file.
///
/// Encoding works for any full-row-rank (or rank-deficient, with dependent
/// rows dropped and counted) parity-check matrix: a one-time Gauss-Jordan
/// elimination fixes a set of pivot (parity) columns; the remaining free
/// columns carry message bits, and `message_positions` records where they
/// sit in the codeword so error counting can target message bits only.
#[derive(Debug, Clone)]
pub struct LdpcCode {
    n: usize,
    k: usize,
    num_checks: usize,
    /// CSR edge layout: edges of check c are check_offset[c]..check_offset[c+1].
    check_offset: Vec<u32>,
    /// Variable index of each edge, ascending within a check.
    edge_var: Vec<u32>,
    /// CSR layout of the transpose: edge ids incident to each variable.
    var_offset: Vec<u32>,
    var_edge: Vec<u32>,
    /// Codeword positions of the k message bits, ascending.
    message_positions: Vec<usize>,
    /// Per parity (pivot) position: (codeword index, mask over message-bit
    /// words whose parity gives the bit value).
    parity_rules: Vec<(usize, Vec<u64>)>,
    /// Dependent parity rows dropped during elimination.
    removed_rows: usize,
}

/// Outcome of one belief-propagation decode.
#[derive(Debug, Clone)]
pub struct DecodeResult {
    /// Hard decisions on all n code bits.
    pub bits: Vec<u8>,
    /// True iff every parity check was satisfied.
    pub converged: bool,
    /// Completed iterations (1-based at the first satisfied check).
    pub iters_used: usize,
    /// Posterior minus channel LLR per bit, in the log p(1)/p(0) convention.
    pub extrinsic: Vec<f64>,
}

impl LdpcCode {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_checks(&self) -> usize {
        self.num_checks
    }

    pub fn message_positions(&self) -> &[usize] {
        &self.message_positions
    }

    pub fn removed_rows(&self) -> usize {
        self.removed_rows
    }

    fn check_edges(&self, c: usize) -> std::ops::Range<usize> {
        self.check_offset[c] as usize..self.check_offset[c + 1] as usize
    }

    /// H * c^T over GF(2).
    pub fn parity_ok(&self, codeword: &[u8]) -> bool {
        (0..self.num_checks).all(|c| {
            self.check_edges(c)
                .fold(0u8, |acc, e| acc ^ (codeword[self.edge_var[e] as usize] & 1))
                == 0
        })
    }

    /// Encode k message bits into an n-bit codeword satisfying every check.
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.k {
            return Err(Error::MessageLength { expected: self.k, got: message.len() });
        }
        let words = self.k.div_ceil(64);
        let mut msg_words = vec![0u64; words];
        for (i, &b) in message.iter().enumerate() {
            if b & 1 == 1 {
                msg_words[i / 64] |= 1u64 << (i % 64);
            }
        }
        let mut c = vec![0u8; self.n];
        for (i, &pos) in self.message_positions.iter().enumerate() {
            c[pos] = message[i] & 1;
        }
        for (pos, mask) in &self.parity_rules {
            let ones: u32 = mask.iter().zip(&msg_words).map(|(m, w)| (m & w).count_ones()).sum();
            c[*pos] = (ones & 1) as u8;
        }
        Ok(c)
    }

    /// Extract the message bits from a codeword (inverse of the placement
    /// done by [`LdpcCode::encode`]).
    pub fn extract_message(&self, codeword: &[u8]) -> Vec<u8> {
        self.message_positions.iter().map(|&p| codeword[p] & 1).collect()
    }

    /// Flooding sum-product decoding of channel LLRs (log p(1)/p(0)).
    ///
    /// Channel inputs are clamped to +/-LLR_MAX, as are variable-to-check
    /// messages, so adversarial infinite inputs stay finite throughout.
    pub fn decode_bp(&self, llr: &[f64], max_iter: usize) -> Result<DecodeResult> {
        if llr.len() != self.n {
            return Err(Error::LlrLength { expected: self.n, got: llr.len() });
        }
        let max_iter = max_iter.max(1);
        // Internally use the log p(0)/p(1) convention (negated), where a
        // check node is a plain tanh product; convert back on exit.
        let lam_ch: Vec<f64> = llr.iter().map(|&l| -l.clamp(-LLR_MAX, LLR_MAX)).collect();

        let num_edges = self.edge_var.len();
        let mut v2c = vec![0.0f64; num_edges];
        let mut c2v = vec![0.0f64; num_edges];
        let mut posterior = lam_ch.clone();
        let mut bits = vec![0u8; self.n];
        let mut converged = false;
        let mut iters_used = 0;

        let max_deg = (0..self.num_checks).map(|c| self.check_edges(c).len()).max().unwrap_or(0);
        let mut tanh_buf = vec![0.0f64; max_deg];
        let mut suffix = vec![1.0f64; max_deg + 1];

        for iter in 1..=max_iter {
            // Variable update: v2c = channel + sum of other-check inputs.
            for v in 0..self.n {
                let edges = self.var_offset[v] as usize..self.var_offset[v + 1] as usize;
                let total: f64 = lam_ch[v]
                    + self.var_edge[edges.clone()].iter().map(|&e| c2v[e as usize]).sum::<f64>();
                for &e in &self.var_edge[edges] {
                    v2c[e as usize] = (total - c2v[e as usize]).clamp(-LLR_MAX, LLR_MAX);
                }
            }
            // Check update: tanh product excluding own edge.
            for c in 0..self.num_checks {
                let lo = self.check_offset[c] as usize;
                let deg = self.check_offset[c + 1] as usize - lo;
                for i in 0..deg {
                    tanh_buf[i] = (v2c[lo + i] * 0.5).tanh();
                }
                suffix[deg] = 1.0;
                for i in (0..deg).rev() {
                    suffix[i] = suffix[i + 1] * tanh_buf[i];
                }
                let mut prefix = 1.0f64;
                for i in 0..deg {
                    let rest = (prefix * suffix[i + 1]).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
                    c2v[lo + i] = 2.0 * rest.atanh();
                    prefix *= tanh_buf[i];
                }
            }
            // Posterior, hard decision, syndrome.
            for v in 0..self.n {
                let edges = self.var_offset[v] as usize..self.var_offset[v + 1] as usize;
                let total: f64 = lam_ch[v]
                    + self.var_edge[edges].iter().map(|&e| c2v[e as usize]).sum::<f64>();
                posterior[v] = total;
                // lambda < 0 means p(1) > p(0); exact zero decides bit 0.
                bits[v] = if total < 0.0 { 1 } else { 0 };
            }
            iters_used = iter;
            if self.parity_ok(&bits) {
                converged = true;
                break;
            }
        }

        let extrinsic: Vec<f64> = (0..self.n).map(|v| -(posterior[v] - lam_ch[v])).collect();
        Ok(DecodeResult { bits, converged, iters_used, extrinsic })
    }
}

/// Parse an alist-format sparse parity-check matrix.
///
/// Layout: line 1 `n m`; line 2 `max_col_deg max_row_deg`; line 3 the n
/// column degrees; line 4 the m row degrees; then n lines of 1-based row
/// indices per column and m lines of 1-based column indices per row.
/// Zero padding up to the max degree is accepted and ignored.
pub fn load_code(source: &str) -> Result<LdpcCode> {
    let lines: Vec<(usize, Vec<i64>)> = source
        .lines()
        .enumerate()
        .map(|(i, l)| {
            let nums = l
                .split_whitespace()
                .map(|t| {
                    t.parse::<i64>().map_err(|_| Error::AlistParse {
                        line: i + 1,
                        reason: format!("not an integer: {t:?}"),
                    })
                })
                .collect::<Result<Vec<i64>>>()?;
            Ok((i + 1, nums))
        })
        .filter(|r| !matches!(r, Ok((_, nums)) if nums.is_empty()))
        .collect::<Result<Vec<_>>>()?;

    let mut it = lines.into_iter();
    let mut next_line = |what: &str| {
        it.next().ok_or_else(|| Error::AlistParse {
            line: 0,
            reason: format!("unexpected end of file, expected {what}"),
        })
    };

    let (line_no, header) = next_line("n m")?;
    if header.len() != 2 || header[0] < 1 || header[1] < 1 {
        return Err(Error::AlistParse { line: line_no, reason: "expected `n m` with n, m >= 1".into() });
    }
    let (n, m) = (header[0] as usize, header[1] as usize);
    if m >= n {
        return Err(Error::AlistParse {
            line: line_no,
            reason: format!("checks m={m} must be fewer than bits n={n}"),
        });
    }

    let (line_no, maxdeg) = next_line("max degrees")?;
    if maxdeg.len() != 2 || maxdeg[0] < 1 || maxdeg[1] < 1 {
        return Err(Error::AlistParse { line: line_no, reason: "expected `max_col_deg max_row_deg`".into() });
    }
    let (max_col, max_row) = (maxdeg[0] as usize, maxdeg[1] as usize);

    let (line_no, col_degs) = next_line("column degrees")?;
    if col_degs.len() != n {
        return Err(Error::AlistParse {
            line: line_no,
            reason: format!("expected {n} column degrees, got {}", col_degs.len()),
        });
    }
    for (i, &d) in col_degs.iter().enumerate() {
        if d < 1 || d as usize > max_col {
            return Err(Error::AlistParse {
                line: line_no,
                reason: format!("column {} degree {d} outside 1..={max_col}", i + 1),
            });
        }
    }
    let (line_no, row_degs) = next_line("row degrees")?;
    if row_degs.len() != m {
        return Err(Error::AlistParse {
            line: line_no,
            reason: format!("expected {m} row degrees, got {}", row_degs.len()),
        });
    }
    for (i, &d) in row_degs.iter().enumerate() {
        if d < 1 || d as usize > max_row {
            return Err(Error::AlistParse {
                line: line_no,
                reason: format!("row {} degree {d} outside 1..={max_row}", i + 1),
            });
        }
    }

    let parse_adjacency = |it: &mut dyn Iterator<Item = (usize, Vec<i64>)>,
                           count: usize,
                           degs: &[i64],
                           max_deg: usize,
                           limit: usize,
                           kind: &str|
     -> Result<Vec<Vec<u32>>> {
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let (line_no, mut vals) = it.next().ok_or_else(|| Error::AlistParse {
                line: 0,
                reason: format!("unexpected end of file in {kind} {} list", i + 1),
            })?;
            // Strip zero padding.
            while vals.last() == Some(&0) {
                vals.pop();
            }
            let deg = degs[i] as usize;
            if vals.len() != deg && vals.len() != max_deg {
                return Err(Error::AlistParse {
                    line: line_no,
                    reason: format!(
                        "{kind} {} lists {} entries, expected degree {deg}",
                        i + 1,
                        vals.len()
                    ),
                });
            }
            let mut idx = Vec::with_capacity(deg);
            for &v in vals.iter().take(deg) {
                if v < 1 || v as usize > limit {
                    return Err(Error::AlistParse {
                        line: line_no,
                        reason: format!("{kind} {} references index {v} outside 1..={limit}", i + 1),
                    });
                }
                idx.push((v - 1) as u32);
            }
            idx.sort_unstable();
            idx.dedup();
            if idx.len() != deg {
                return Err(Error::AlistParse {
                    line: line_no,
                    reason: format!("{kind} {} has duplicate entries", i + 1),
                });
            }
            out.push(idx);
        }
        Ok(out)
    };

    let col_lists = parse_adjacency(&mut it, n, &col_degs, max_col, m, "column")?;
    let row_lists = parse_adjacency(&mut it, m, &row_degs, max_row, n, "row")?;

    // Cross-check: the row lists must describe the same matrix.
    let mut rows_from_cols: Vec<Vec<u32>> = vec![Vec::new(); m];
    for (col, rows) in col_lists.iter().enumerate() {
        for &r in rows {
            rows_from_cols[r as usize].push(col as u32);
        }
    }
    for (r, want) in rows_from_cols.iter_mut().enumerate() {
        want.sort_unstable();
        if *want != row_lists[r] {
            return Err(Error::AlistParse {
                line: 0,
                reason: format!("row {} list disagrees with column lists", r + 1),
            });
        }
    }

    build_code(n, row_lists)
}

/// Load an alist file from disk.
pub fn load_code_file(path: &std::path::Path) -> Result<LdpcCode> {
    let text = std::fs::read_to_string(path)?;
    load_code(&text)
}

fn build_code(n: usize, check_vars: Vec<Vec<u32>>) -> Result<LdpcCode> {
    let m = check_vars.len();
    let words = n.div_ceil(64);

    // CSR edge layout for the decoder.
    let mut check_offset = Vec::with_capacity(m + 1);
    check_offset.push(0u32);
    let mut edge_var: Vec<u32> = Vec::new();
    for row in &check_vars {
        edge_var.extend_from_slice(row);
        check_offset.push(edge_var.len() as u32);
    }
    let mut var_counts = vec![0u32; n];
    for &v in &edge_var {
        var_counts[v as usize] += 1;
    }
    let mut var_offset = Vec::with_capacity(n + 1);
    var_offset.push(0u32);
    for v in 0..n {
        var_offset.push(var_offset[v] + var_counts[v]);
    }
    let mut cursor = var_offset.clone();
    let mut var_edge = vec![0u32; edge_var.len()];
    for (e, &v) in edge_var.iter().enumerate() {
        var_edge[cursor[v as usize] as usize] = e as u32;
        cursor[v as usize] += 1;
    }

    // Dense GF(2) Gauss-Jordan elimination to reduced row-echelon form.
    let mut rows: Vec<Vec<u64>> = check_vars
        .iter()
        .map(|r| {
            let mut w = vec![0u64; words];
            for &v in r {
                w[v as usize / 64] |= 1u64 << (v as usize % 64);
            }
            w
        })
        .collect();

    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..n {
        let (wi, bit) = (col / 64, 1u64 << (col % 64));
        let Some(p) = (rank..m).find(|&r| rows[r][wi] & bit != 0) else { continue };
        rows.swap(rank, p);
        let pivot_row = rows[rank].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != rank && row[wi] & bit != 0 {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a ^= b;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == m {
            break;
        }
    }
    let removed_rows = m - rank;

    let mut is_pivot = vec![false; n];
    for &c in &pivot_cols {
        is_pivot[c] = true;
    }
    let message_positions: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let k = message_positions.len();
    // Column -> message index lookup.
    let mut msg_index = vec![usize::MAX; n];
    for (i, &c) in message_positions.iter().enumerate() {
        msg_index[c] = i;
    }

    let msg_words = k.div_ceil(64);
    let parity_rules: Vec<(usize, Vec<u64>)> = pivot_cols
        .iter()
        .enumerate()
        .map(|(r, &p)| {
            let mut mask = vec![0u64; msg_words];
            for col in 0..n {
                if rows[r][col / 64] & (1u64 << (col % 64)) != 0 && col != p {
                    let mi = msg_index[col];
                    debug_assert_ne!(mi, usize::MAX, "RREF row touches a non-pivot column only");
                    mask[mi / 64] |= 1u64 << (mi % 64);
                }
            }
            (p, mask)
        })
        .collect();

    Ok(LdpcCode {
        n,
        k,
        num_checks: m,
        check_offset,
        edge_var,
        var_offset,
        var_edge,
        message_positions,
        parity_rules,
        removed_rows,
    })
}
