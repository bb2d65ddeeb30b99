//! Finite groups given by their multiplication table.

use crate::error::{Error, Result};

/// Largest order for which associativity is verified exhaustively.
pub const ASSOCIATIVITY_CHECK_LIMIT: usize = 64;

/// Multiplication table of a finite group; `table[g * order + h]` is the index of `g h`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupTable {
    order: usize,
    table: Vec<usize>,
    identity: usize,
    inverse: Vec<usize>,
}

impl GroupTable {
    pub fn new(order: usize, table: Vec<usize>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidDescriptor("group must be non-empty".into()));
        }
        if table.len() != order * order {
            return Err(Error::InvalidDescriptor(format!(
                "group table has {} entries, expected {}",
                table.len(),
                order * order
            )));
        }
        // Latin square: every row and column is a permutation.
        for g in 0..order {
            let mut row_seen = vec![false; order];
            let mut col_seen = vec![false; order];
            for h in 0..order {
                let r = table[g * order + h];
                let c = table[h * order + g];
                if r >= order || c >= order {
                    return Err(Error::InvalidDescriptor(format!(
                        "group table entry out of range at row {g}"
                    )));
                }
                if row_seen[r] || col_seen[c] {
                    return Err(Error::InvalidDescriptor(format!(
                        "row or column {g} of the group table is not a permutation"
                    )));
                }
                row_seen[r] = true;
                col_seen[c] = true;
            }
        }
        let identity = (0..order)
            .find(|&e| (0..order).all(|g| table[e * order + g] == g && table[g * order + e] == g))
            .ok_or_else(|| Error::InvalidDescriptor("group table has no identity".into()))?;
        if order <= ASSOCIATIVITY_CHECK_LIMIT {
            for a in 0..order {
                for b in 0..order {
                    let ab = table[a * order + b];
                    for c in 0..order {
                        let bc = table[b * order + c];
                        if table[ab * order + c] != table[a * order + bc] {
                            return Err(Error::InvalidDescriptor(format!(
                                "group table is not associative at ({a}, {b}, {c})"
                            )));
                        }
                    }
                }
            }
        }
        let inverse = (0..order)
            .map(|g| {
                (0..order)
                    .find(|&h| table[g * order + h] == identity)
                    .expect("latin square rows contain the identity")
            })
            .collect();
        Ok(Self {
            order,
            table,
            identity,
            inverse,
        })
    }

    /// Cyclic group Z/n with element `k` standing for the residue `k`.
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDescriptor("cyclic group order must be >= 1".into()));
        }
        let table = (0..n * n).map(|idx| (idx / n + idx % n) % n).collect();
        Self::new(n, table)
    }

    /// Symmetric group S_n, elements are permutations in lexicographic order
    /// (index 0 is the identity) and `g h` is the composition `g ∘ h`.
    pub fn symmetric(n: usize) -> Result<Self> {
        if n == 0 || n > 5 {
            return Err(Error::InvalidDescriptor(format!(
                "symmetric group S_{n} not supported (1 <= n <= 5)"
            )));
        }
        let perms = permutations(n);
        let order = perms.len();
        let index_of = |p: &[usize]| perms.iter().position(|q| q == p).unwrap();
        let mut table = Vec::with_capacity(order * order);
        for g in &perms {
            for h in &perms {
                let gh: Vec<usize> = h.iter().map(|&i| g[i]).collect();
                table.push(index_of(&gh));
            }
        }
        Self::new(order, table)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    #[inline]
    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.table[g * self.order + h]
    }

    #[inline]
    pub fn inv(&self, g: usize) -> usize {
        self.inverse[g]
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|g| (0..self.order).all(|h| self.mul(g, h) == self.mul(h, g)))
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cyclic_and_symmetric_tables_are_groups() {
        let z4 = GroupTable::cyclic(4).unwrap();
        assert_eq!(z4.identity(), 0);
        assert_eq!(z4.inv(1), 3);
        assert!(z4.is_abelian());

        let s3 = GroupTable::symmetric(3).unwrap();
        assert_eq!(s3.order(), 6);
        assert_eq!(s3.identity(), 0);
        assert!(!s3.is_abelian());
        for g in 0..6 {
            assert_eq!(s3.mul(g, s3.inv(g)), 0);
        }
    }

    #[test]
    fn rejects_non_latin_square() {
        assert!(GroupTable::new(2, vec![0, 1, 1, 1]).is_err());
    }

    #[test]
    fn rejects_missing_identity() {
        // x * y = -x - y (mod 3): a latin square without an identity element.
        assert!(GroupTable::new(3, vec![0, 2, 1, 2, 1, 0, 1, 0, 2]).is_err());
    }

    #[test]
    fn rejects_non_associative_quasigroup() {
        // Loop of order 5 with identity 0 that is not associative.
        #[rustfmt::skip]
        let t = vec![
            0, 1, 2, 3, 4,
            1, 0, 3, 4, 2,
            2, 4, 0, 1, 3,
            3, 2, 4, 0, 1,
            4, 3, 1, 2, 0,
        ];
        let err = GroupTable::new(5, t).unwrap_err();
        assert!(err.to_string().contains("associative"), "{err}");
    }
}
