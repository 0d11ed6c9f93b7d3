//! Deformation calculus on generator assignments.
//!
//! An assignment of one tensor per generator, with every map degree shifted
//! uniformly by the same amount, is a homogeneous element of the convolution
//! space attached to a presentation and a target complex.  Expanding the
//! differential of each generator over decorated graphs equips that space
//! with a tower of brackets: one bracket per graph size, all of degree +1 and
//! graded symmetric in the shifted grading used here.  Degree-zero solutions
//! of the resulting Maurer-Cartan equation are exactly the representations of
//! the presentation, and twisting by a solution transports the tower.  The
//! classical insertion (composition) bracket on multilinear maps is provided
//! alongside as an independent cross-check for the associative tower.

use crate::catalog::Presentation;
use crate::diff::{check_representation, completed};
use crate::engine::{
    evaluate, evaluate_term_with, tensor_differential, Representation, TensorMap,
};
use crate::span::GenId;
use crate::{q, Error, Q, Result};
use itertools::Itertools;
use num::{One, Zero};
use std::collections::BTreeMap;

/// (-1)^e for a possibly negative exponent.
fn sgn(e: i64) -> Q {
    if e.rem_euclid(2) == 0 {
        Q::one()
    } else {
        -Q::one()
    }
}

/// Koszul sign of presenting arguments with the given parities in the order
/// `order`: each inversion between two odd arguments costs a sign.
fn order_sign(order: &[usize], odd: &[bool]) -> Q {
    let mut neg = false;
    for i in 0..order.len() {
        for j in i + 1..order.len() {
            if order[i] > order[j] && odd[order[i]] && odd[order[j]] {
                neg = !neg;
            }
        }
    }
    if neg {
        -Q::one()
    } else {
        Q::one()
    }
}

/// Koszul sign of pulling the selected arguments to the front, keeping the
/// relative order within both blocks.
fn unshuffle_sign(sel: &[bool], odd: &[bool]) -> Q {
    let mut neg = false;
    for j in 0..sel.len() {
        if !sel[j] || !odd[j] {
            continue;
        }
        for i in 0..j {
            if !sel[i] && odd[i] {
                neg = !neg;
            }
        }
    }
    if neg {
        -Q::one()
    } else {
        Q::one()
    }
}

/// A homogeneous element of the convolution space: one tensor per generator,
/// each of map degree `generator degree + hom_degree`.  Generators absent
/// from the map carry the zero tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvElement {
    pub hom_degree: i64,
    pub assign: BTreeMap<GenId, TensorMap>,
}

impl ConvElement {
    pub fn zero(hom_degree: i64) -> ConvElement {
        ConvElement {
            hom_degree,
            assign: BTreeMap::new(),
        }
    }

    /// View a representation-shaped assignment as the degree-zero element.
    pub fn from_rep(rep: &Representation) -> ConvElement {
        ConvElement {
            hom_degree: 0,
            assign: rep
                .assign
                .iter()
                .filter(|(_, t)| !t.is_zero())
                .map(|(id, t)| (*id, t.clone()))
                .collect(),
        }
    }

    pub fn set(&mut self, id: GenId, t: TensorMap) {
        if t.is_zero() {
            self.assign.remove(&id);
        } else {
            self.assign.insert(id, t);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.assign.values().all(|t| t.is_zero())
    }

    pub fn scaled(&self, c: &Q) -> ConvElement {
        if c.is_zero() {
            return ConvElement::zero(self.hom_degree);
        }
        ConvElement {
            hom_degree: self.hom_degree,
            assign: self
                .assign
                .iter()
                .map(|(id, t)| (*id, t.scaled(c)))
                .collect(),
        }
    }

    pub fn add(&mut self, other: &ConvElement) -> Result<()> {
        if self.hom_degree != other.hom_degree {
            return Err(Error::DegreeMismatch(format!(
                "adding elements of hom degrees {} and {}",
                self.hom_degree, other.hom_degree
            )));
        }
        for (id, t) in &other.assign {
            match self.assign.get_mut(id) {
                Some(own) => {
                    own.add(t);
                    if own.is_zero() {
                        self.assign.remove(id);
                    }
                }
                None => {
                    self.assign.insert(*id, t.clone());
                }
            }
        }
        Ok(())
    }

    /// Shape, dimension, and degree checks against the ambient algebra.
    fn validate(&self, amb: &LInftyAlgebra) -> Result<()> {
        for (id, t) in &self.assign {
            if *id >= amb.pres.module.len() {
                return Err(Error::UnknownName(format!("generator id {id}")));
            }
            if t.is_zero() {
                continue;
            }
            let g = amb.pres.module.get(*id);
            if t.v_degrees != amb.v_degrees {
                return Err(Error::DimensionMismatch(format!(
                    "tensor for {} lives on a different target",
                    g.name
                )));
            }
            if t.outs != g.outs || t.ins != g.ins {
                return Err(Error::ArityMismatch(format!(
                    "tensor for {} has shape ({},{}), generator has ({},{})",
                    g.name, t.outs, t.ins, g.outs, g.ins
                )));
            }
            match t.map_degree() {
                None => return Err(Error::NonHomogeneous),
                Some(d) if d != g.degree + self.hom_degree => {
                    return Err(Error::DegreeMismatch(format!(
                        "tensor for {} has map degree {}, expected {}",
                        g.name,
                        d,
                        g.degree + self.hom_degree
                    )))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// The bracket tower on convolution elements of one presentation, evaluated
/// on demand.  `n_max` bounds the bracket arity that callers may request; the
/// brackets themselves vanish beyond the largest graph appearing in the
/// differential, so the bound is a guard, not a truncation of stored data.
/// An optional accumulated twist shifts every bracket by insertions of a
/// fixed degree-zero solution.
#[derive(Debug, Clone)]
pub struct LInftyAlgebra<'a> {
    pub pres: &'a Presentation,
    pub v_degrees: Vec<i64>,
    pub differential: Option<TensorMap>,
    pub n_max: usize,
    shift: Option<ConvElement>,
}

/// Assemble the bracket tower for a presentation on the given target
/// complex.  The target differential, when present, must be a square-zero
/// endomorphism of degree +1.
pub fn convolution_linfty<'a>(
    pres: &'a Presentation,
    v_degrees: Vec<i64>,
    differential: Option<TensorMap>,
    n_max: usize,
) -> Result<LInftyAlgebra<'a>> {
    if n_max == 0 {
        return Err(Error::ConfigError("bracket arity bound must be positive".into()));
    }
    if let Some(d) = &differential {
        if d.outs != 1 || d.ins != 1 {
            return Err(Error::ArityMismatch(format!(
                "target differential has shape ({},{})",
                d.outs, d.ins
            )));
        }
        if d.v_degrees != v_degrees {
            return Err(Error::DimensionMismatch(
                "target differential lives on a different target".into(),
            ));
        }
        if !d.is_zero() {
            match d.map_degree() {
                Some(1) => {}
                Some(k) => {
                    return Err(Error::DegreeMismatch(format!(
                        "target differential has degree {k}, expected 1"
                    )))
                }
                None => return Err(Error::NonHomogeneous),
            }
            // tensor_differential(d, d) = 2 d.d, so this is the square.
            if !tensor_differential(d, d)?.is_zero() {
                return Err(Error::ConfigError(
                    "target differential does not square to zero".into(),
                ));
            }
        }
    }
    Ok(LInftyAlgebra {
        pres,
        v_degrees,
        differential,
        n_max,
        shift: None,
    })
}

impl<'a> LInftyAlgebra<'a> {
    /// The untwisted bracket of the given arity.  The unary bracket is the
    /// commutator with the target differential plus the one-vertex rules;
    /// the n-ary bracket decorates every n-vertex graph of the generator
    /// rules with the arguments in all orders, weighting each order by the
    /// Koszul sign of its inversions and of the generator degrees each
    /// argument crosses on the way to its vertex.  The leading sign is
    /// normalized so that the degree-zero residual series reproduces the
    /// morphism defect with the orientation "target differential after,
    /// rules before".
    fn raw_bracket(&self, args: &[&ConvElement]) -> Result<ConvElement> {
        let n = args.len();
        let total: i64 = args.iter().map(|a| a.hom_degree).sum();
        let odd: Vec<bool> = args
            .iter()
            .map(|a| a.hom_degree.rem_euclid(2) == 1)
            .collect();
        let global = sgn(total + 1);
        let mut out = ConvElement::zero(total + 1);
        for gid in 0..self.pres.module.len() {
            let g = self.pres.module.get(gid);
            let mut acc = TensorMap::zero(self.v_degrees.clone(), g.outs, g.ins);
            if n == 1 {
                if let (Some(d), Some(t)) = (&self.differential, args[0].assign.get(&gid)) {
                    if !t.is_zero() {
                        acc.add(&tensor_differential(t, d)?);
                    }
                }
            }
            for (term, c) in self.pres.differential_of(gid).terms() {
                if term.dec.gens.len() != n {
                    continue;
                }
                // Parity of the generator-degree sum left of each vertex in
                // the stored order: shifting an argument into a vertex costs
                // the degrees it crosses on the way in.  Together with the
                // inversion signs this makes the sum independent of the
                // order in which the term stores its vertices.
                let mut prefix_odd = vec![false; n];
                let mut run = 0i64;
                for v in 0..n {
                    prefix_odd[v] = run.rem_euclid(2) == 1;
                    run += self.pres.module.get(term.dec.gens[v]).degree;
                }
                'orders: for perm in (0..n).permutations(n) {
                    let mut tensors: Vec<&TensorMap> = Vec::with_capacity(n);
                    for v in 0..n {
                        match args[perm[v]].assign.get(&term.dec.gens[v]) {
                            Some(t) if !t.is_zero() => tensors.push(t),
                            _ => continue 'orders,
                        }
                    }
                    let mut cross = Q::one();
                    for v in 0..n {
                        if odd[perm[v]] && prefix_odd[v] {
                            cross = -cross;
                        }
                    }
                    let coeff = global.clone() * order_sign(&perm, &odd) * cross * c.clone();
                    let val = evaluate_term_with(&term.dec.graph, &tensors, &self.v_degrees)?;
                    acc.add(&val.scaled(&coeff));
                }
            }
            if !acc.is_zero() {
                out.assign.insert(gid, acc);
            }
        }
        Ok(out)
    }

    /// The bracket of the given arguments, including the accumulated twist:
    /// every arity is corrected by higher brackets with copies of the twist
    /// inserted in front, weighted by 1/k!.
    pub fn bracket(&self, args: &[&ConvElement]) -> Result<ConvElement> {
        let n = args.len();
        if n == 0 {
            return Err(Error::ArityMismatch("bracket of no arguments".into()));
        }
        if n > self.n_max {
            return Err(Error::ArityMismatch(format!(
                "bracket arity {n} exceeds the configured bound {}",
                self.n_max
            )));
        }
        for a in args {
            a.validate(self)?;
        }
        let mut out = self.raw_bracket(args)?;
        if let Some(shift) = &self.shift {
            let mut coeff = Q::one();
            for k in 1..=self.n_max - n {
                coeff /= q(k as i64);
                let padded: Vec<&ConvElement> = std::iter::repeat(shift)
                    .take(k)
                    .chain(args.iter().copied())
                    .collect();
                out.add(&self.raw_bracket(&padded)?.scaled(&coeff))?;
            }
        }
        Ok(out)
    }

    /// The curvature series sum_k 1/k! of the k-fold bracket of a
    /// degree-zero element with itself, up to the arity bound.
    pub fn mc_residual(&self, gamma: &ConvElement) -> Result<ConvElement> {
        if gamma.hom_degree != 0 {
            return Err(Error::DegreeMismatch(format!(
                "solution candidates sit in hom degree 0, got {}",
                gamma.hom_degree
            )));
        }
        let mut out = ConvElement::zero(1);
        let mut coeff = Q::one();
        for k in 1..=self.n_max {
            coeff /= q(k as i64);
            let copies: Vec<&ConvElement> = vec![gamma; k];
            out.add(&self.bracket(&copies)?.scaled(&coeff))?;
        }
        Ok(out)
    }

    /// Transport the tower along a degree-zero solution.  Fails when the
    /// candidate does not solve the Maurer-Cartan equation of the current
    /// (possibly already twisted) tower.
    pub fn twist(&self, gamma: &ConvElement) -> Result<LInftyAlgebra<'a>> {
        if !self.mc_residual(gamma)?.is_zero() {
            return Err(Error::NotMaurerCartan);
        }
        let mut shift = match &self.shift {
            Some(s) => s.clone(),
            None => ConvElement::zero(0),
        };
        shift.add(gamma)?;
        Ok(LInftyAlgebra {
            pres: self.pres,
            v_degrees: self.v_degrees.clone(),
            differential: self.differential.clone(),
            n_max: self.n_max,
            shift: Some(shift),
        })
    }

    /// The defect of the coherence identity of total arity `args.len()`: the
    /// sum over nonempty argument subsets of the inner bracket of the subset
    /// fed into the outer bracket with the rest, each summand weighted by
    /// the Koszul sign of the unshuffle.  Zero for a consistent tower.
    pub fn identity_residual(&self, args: &[&ConvElement]) -> Result<ConvElement> {
        let n = args.len();
        if n == 0 || n > 32 {
            return Err(Error::ArityMismatch(format!("identity of arity {n}")));
        }
        let total: i64 = args.iter().map(|a| a.hom_degree).sum();
        let odd: Vec<bool> = args
            .iter()
            .map(|a| a.hom_degree.rem_euclid(2) == 1)
            .collect();
        let mut out = ConvElement::zero(total + 2);
        for mask in 1u64..(1 << n) {
            let sel: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let inner_args: Vec<&ConvElement> = (0..n)
                .filter(|&i| sel[i])
                .map(|i| args[i])
                .collect();
            let inner = self.bracket(&inner_args)?;
            let mut outer_args: Vec<&ConvElement> = vec![&inner];
            outer_args.extend((0..n).filter(|&i| !sel[i]).map(|i| args[i]));
            let contribution = self.bracket(&outer_args)?;
            out.add(&contribution.scaled(&unshuffle_sign(&sel, &odd)))?;
        }
        Ok(out)
    }
}

/// Outcome of the two-route comparison on one assignment: the curvature
/// series, the direct per-generator morphism check, and whether the two
/// defects agree tensor by tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct McReport {
    pub mc_zero: bool,
    pub dg_morphism: bool,
    pub residuals_match: bool,
}

impl McReport {
    pub fn consistent(&self) -> bool {
        self.mc_zero == self.dg_morphism && self.residuals_match
    }
}

/// Run both routes on one assignment: the curvature series of the element in
/// the convolution tower, and the per-generator morphism check.  The arity
/// bound must dominate every graph in the differential, otherwise the series
/// is genuinely truncated and the comparison reports the discrepancy.
/// Assignments must be equivariant up front; everything else (degree, shape,
/// defect) is part of what the two routes measure.
pub fn mc_equivalence_check(
    pres: &Presentation,
    rep: &Representation,
    n_max: usize,
) -> Result<McReport> {
    for (gid, t) in &rep.assign {
        if t.is_zero() {
            continue;
        }
        let g = pres.module.get(*gid);
        if !t.equivariant_under(g.out_sym, g.in_sym) {
            return Err(Error::NotAdmissible(format!(
                "assignment for {} is not equivariant",
                g.name
            )));
        }
    }
    let amb = convolution_linfty(pres, rep.v_degrees.clone(), rep.differential.clone(), n_max)?;
    let mc = amb.mc_residual(&ConvElement::from_rep(rep))?;
    let report = check_representation(pres, rep)?;
    let full = completed(rep, &pres.module);
    let zero_d = TensorMap::zero(rep.v_degrees.clone(), 1, 1);
    let d = rep.differential.as_ref().unwrap_or(&zero_d);
    let mut residuals_match = true;
    for gid in 0..pres.module.len() {
        let g = pres.module.get(gid);
        let mut expected = tensor_differential(&full.assign[&gid], d)?;
        expected.sub(&evaluate(&pres.differential_of(gid), &full)?);
        let got = mc.assign.get(&gid).cloned().unwrap_or_else(|| {
            TensorMap::zero(rep.v_degrees.clone(), g.outs, g.ins)
        });
        if got != expected {
            residuals_match = false;
        }
    }
    Ok(McReport {
        mc_zero: mc.is_zero(),
        dg_morphism: report.ok(),
        residuals_match,
    })
}

/// Substitute `g` into input slot `pos` (1-based) of `f`.  Both tensors must
/// be single-output multilinear maps on the same ungraded target.
pub fn insert_cochain(f: &TensorMap, g: &TensorMap, pos: usize) -> Result<TensorMap> {
    if f.outs != 1 || g.outs != 1 {
        return Err(Error::ArityMismatch(
            "insertion needs single-output tensors".into(),
        ));
    }
    if f.v_degrees != g.v_degrees {
        return Err(Error::DimensionMismatch(
            "insertion of maps on different targets".into(),
        ));
    }
    if f.v_degrees.iter().any(|&d| d != 0) {
        return Err(Error::DegreeMismatch(
            "the insertion bracket is stated for ungraded targets".into(),
        ));
    }
    if pos == 0 || pos > f.ins {
        return Err(Error::IndexOutOfRange(format!(
            "input slot {pos} of a map with {} inputs",
            f.ins
        )));
    }
    let mut out = TensorMap::zero(f.v_degrees.clone(), 1, f.ins + g.ins - 1);
    for ((fo, fi), fc) in &f.entries {
        for ((go, gi), gc) in &g.entries {
            if fi[pos - 1] != go[0] {
                continue;
            }
            let mut idx = Vec::with_capacity(f.ins + g.ins - 1);
            idx.extend_from_slice(&fi[..pos - 1]);
            idx.extend_from_slice(gi);
            idx.extend_from_slice(&fi[pos..]);
            out.add_entry(fo.clone(), idx, fc * gc);
        }
    }
    Ok(out)
}

/// The classical bracket on multilinear maps of an ungraded space: the
/// alternating sum of all insertions of one map into the other, minus the
/// transposed sum weighted by the parities of the shifted arities.
pub fn gerstenhaber_bracket(f: &TensorMap, g: &TensorMap) -> Result<TensorMap> {
    if f.ins == 0 && g.ins == 0 {
        return Err(Error::ArityMismatch(
            "bracket of two maps without inputs".into(),
        ));
    }
    let mut out = TensorMap::zero(f.v_degrees.clone(), 1, f.ins + g.ins - 1);
    for i in 1..=f.ins {
        let s = sgn(((i - 1) * (g.ins + 1)) as i64);
        out.add(&insert_cochain(f, g, i)?.scaled(&s));
    }
    let swap = sgn(((f.ins + 1) * (g.ins + 1)) as i64);
    for i in 1..=g.ins {
        let s = swap.clone() * sgn(((i - 1) * (f.ins + 1)) as i64);
        out.sub(&insert_cochain(g, f, i)?.scaled(&s));
    }
    Ok(out)
}
