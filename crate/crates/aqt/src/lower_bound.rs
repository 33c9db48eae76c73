//! Worst-case adversary construction on a line of `n = (ell+1) * m^ell`
//! buffers.
//!
//! Time is divided into `m^ell` phases of `m` rounds. Each phase injects on
//! `ell + 1` non-overlapping routes whose sites are determined by the base-m
//! digits of the phase index; the rightmost injection site `F(t)` moves left
//! at phase boundaries. Round arithmetic here uses 0-based "construction rounds";
//! the simulator's 1-based round `t` corresponds to construction round `t - 1`.

use crate::adversary::{InjectionPattern, Packet};
use crate::rational::Rational;
use crate::topology::{NodeId, Topology};
use crate::{AqtError, Result};
use serde::{Deserialize, Serialize};

/// Parameters of the lower-bound adversary. Requires `rho * m` integral and
/// `rho > 1/(ell+1)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LbParams {
    pub m: u32,
    pub ell: u32,
    #[serde(with = "rho_serde")]
    pub rho: Rational,
}

mod rho_serde {
    use crate::rational::{format_rational, parse_rational, Rational};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(*r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        parse_rational(&String::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl LbParams {
    pub fn new(m: u32, ell: u32, rho: Rational) -> Result<LbParams> {
        let p = LbParams { m, ell, rho };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.ell < 2 {
            return Err(AqtError::InvalidParams("need m >= 2 and ell >= 2".into()));
        }
        if !(self.rho * Rational::from_integer(self.m as i64)).is_integer() {
            return Err(AqtError::InvalidParams(format!(
                "rho * m must be a natural number (rho = {}, m = {})",
                self.rho, self.m
            )));
        }
        if self.rho <= Rational::new(1, self.ell as i64 + 1) {
            return Err(AqtError::InvalidParams(format!(
                "need rho > 1/(ell+1) (rho = {}, ell = {})",
                self.rho, self.ell
            )));
        }
        Ok(())
    }

    /// Packets injected per route per phase.
    pub fn packets_per_route(&self) -> u64 {
        (self.rho * Rational::from_integer(self.m as i64)).to_integer() as u64
    }

    /// Number of buffers, `(ell + 1) * m^ell`.
    pub fn node_count(&self) -> u32 {
        (self.ell + 1) * self.m.pow(self.ell)
    }

    /// Total rounds, `m^(ell+1)` (i.e., `m^ell` phases of `m` rounds).
    pub fn horizon(&self) -> u32 {
        self.m.pow(self.ell + 1)
    }

    pub fn topology(&self) -> Topology {
        Topology::line(self.node_count())
    }

    /// Base-m digits of construction round `t`, little-endian: `digits[i]` is the
    /// coefficient of `m^i`, for `i` in `0..=ell`. The phase id of `t` is
    /// `digits[1..]`.
    pub fn digits(&self, t: u32) -> Result<Vec<u32>> {
        if t >= self.horizon() {
            return Err(AqtError::OutOfRange(t as u64));
        }
        let mut digits = Vec::with_capacity(self.ell as usize + 1);
        let mut rest = t;
        for _ in 0..=self.ell {
            digits.push(rest % self.m);
            rest /= self.m;
        }
        Ok(digits)
    }

    /// The k-th injection site of a phase, for `k` in `1..=ell`:
    /// `v_k = sum_{j=k..ell} ((j+1) m^j - (t_j + 1) j m^(j-1))`.
    /// `phase` is little-endian with `phase[i]` the digit `t_(i+1)`.
    pub fn site(&self, k: u32, phase: &[u32]) -> NodeId {
        assert!((1..=self.ell).contains(&k));
        assert_eq!(phase.len(), self.ell as usize);
        let m = self.m as i64;
        let mut v = 0i64;
        for j in k as i64..=self.ell as i64 {
            let t_j = phase[(j - 1) as usize] as i64;
            v += (j + 1) * m.pow(j as u32) - (t_j + 1) * j * m.pow(j as u32 - 1);
        }
        v as NodeId
    }

    /// The injection frontier `F(t)` at construction round `t`: the type-1 site of
    /// the phase containing `t`. Computed fresh from the digits every time.
    pub fn frontier(&self, t: u32) -> Result<NodeId> {
        let digits = self.digits(t)?;
        Ok(self.site(1, &digits[1..]))
    }

    /// The full injection pattern. Each phase injects `rho * m` packets on
    /// each of the `ell + 1` routes: type 1 at `v_1` toward the sink `n`,
    /// type k in `2..=ell` at `v_k` toward `v_(k-1)`, and type `ell+1` at
    /// buffer 0 toward `v_ell`. The packets of a route are spread within the
    /// phase at the round offsets where `r * rho` crosses an integer, which
    /// keeps the result (rho, 1)-bounded.
    pub fn pattern(&self) -> Result<InjectionPattern> {
        self.validate()?;
        let topo = self.topology();
        let n = self.node_count();
        let m = self.m;
        let phases = m.pow(self.ell);
        let mut packets = Vec::new();
        for phase_idx in 0..phases {
            let mut phase = Vec::with_capacity(self.ell as usize);
            let mut rest = phase_idx;
            for _ in 0..self.ell {
                phase.push(rest % m);
                rest /= m;
            }
            let sites: Vec<NodeId> = (1..=self.ell).map(|k| self.site(k, &phase)).collect();
            // routes as (source, dest, type tag)
            let mut routes: Vec<(NodeId, NodeId, u8)> = vec![(sites[0], n, 1)];
            for k in 2..=self.ell {
                routes.push((sites[(k - 1) as usize], sites[(k - 2) as usize], k as u8));
            }
            routes.push((0, sites[self.ell as usize - 1], (self.ell + 1) as u8));
            for r in 1..=m {
                let crosses_integer = (self.rho * Rational::from_integer(r as i64)).floor()
                    != (self.rho * Rational::from_integer(r as i64 - 1)).floor();
                if !crosses_integer {
                    continue;
                }
                let sim_round = phase_idx * m + r;
                for &(source, dest, tag) in &routes {
                    packets.push(Packet {
                        id: 0,
                        round: sim_round,
                        source,
                        dest,
                        tag: Some(tag),
                    });
                }
            }
        }
        InjectionPattern::new(&topo, packets)
    }
}
