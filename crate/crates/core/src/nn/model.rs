use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;

use super::{Dense, Mlp, MlpCache, Parameters};
use crate::data::checkpoint::NamedTensor;
use crate::data::ViewId;
use crate::error::{Error, Result};

/// Width of the projected representation and of every head's hidden layer.
pub const PROJ_DIM: usize = 256;

const ROLES: [&str; 3] = ["proj", "head_known", "head_unknown"];

/// One view's projection network and its known/unknown classifier heads.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub view: ViewId,
    pub proj: Mlp,
    pub head_known: Mlp,
    pub head_unknown: Mlp,
}

#[derive(Debug, Clone)]
pub struct BranchCache {
    proj: MlpCache,
    known: MlpCache,
    unknown: MlpCache,
}

impl BranchCache {
    /// Smallest `|z|` over every hidden pre-activation of the three networks.
    pub fn min_abs_preactivation(&self) -> f64 {
        [&self.proj, &self.known, &self.unknown]
            .iter()
            .map(|c| c.min_abs_preactivation())
            .fold(f64::INFINITY, f64::min)
    }
}

impl Branch {
    /// Projection `in_dim → hidden → hidden`, heads `hidden → hidden → C`.
    pub fn init<R: Rng + ?Sized>(
        view: ViewId,
        in_dim: usize,
        hidden: usize,
        num_known: usize,
        num_unknown: usize,
        rng: &mut R,
    ) -> Self {
        Self {
            view,
            proj: Mlp::new(&[in_dim, hidden, hidden], rng),
            head_known: Mlp::new(&[hidden, hidden, num_known], rng),
            head_unknown: Mlp::new(&[hidden, hidden, num_unknown], rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            view: self.view,
            proj: self.proj.zeros_like(),
            head_known: self.head_known.zeros_like(),
            head_unknown: self.head_unknown.zeros_like(),
        }
    }

    pub fn num_known(&self) -> usize {
        self.head_known.out_dim()
    }

    pub fn num_unknown(&self) -> usize {
        self.head_unknown.out_dim()
    }

    pub fn num_classes(&self) -> usize {
        self.num_known() + self.num_unknown()
    }

    pub fn project(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.proj.predict(x)
    }

    /// Concatenated `[known | unknown]` logits without caching.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let h = self.proj.predict(x)?;
        let lk = self.head_known.predict(h.view())?;
        let lu = self.head_unknown.predict(h.view())?;
        Ok(concatenate![Axis(1), lk, lu])
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, BranchCache)> {
        let (h, proj) = self.proj.forward(x)?;
        let (lk, known) = self.head_known.forward(h.view())?;
        let (lu, unknown) = self.head_unknown.forward(h.view())?;
        Ok((
            concatenate![Axis(1), lk, lu],
            BranchCache {
                proj,
                known,
                unknown,
            },
        ))
    }

    /// Parameter gradients given `dL/d[known | unknown logits]`.
    pub fn backward(&self, cache: &BranchCache, d_logits: ArrayView2<'_, f64>) -> Result<Branch> {
        if d_logits.ncols() != self.num_classes() {
            return Err(Error::Shape(format!(
                "logit gradient has {} columns, branch has {} classes",
                d_logits.ncols(),
                self.num_classes()
            )));
        }
        let ck = self.num_known();
        let dk = d_logits.slice(s![.., ..ck]);
        let du = d_logits.slice(s![.., ck..]);
        let (mut dh, head_known) = self.head_known.backward(&cache.known, dk)?;
        let head_unknown = if du.iter().all(|&g| g == 0.0) {
            self.head_unknown.zeros_like()
        } else {
            let (dh_u, g) = self.head_unknown.backward(&cache.unknown, du)?;
            dh += &dh_u;
            g
        };
        let (_, proj) = self.proj.backward(&cache.proj, dh.view())?;
        Ok(Branch {
            view: self.view,
            proj,
            head_known,
            head_unknown,
        })
    }

    fn role(&self, role: &str) -> &Mlp {
        match role {
            "proj" => &self.proj,
            "head_known" => &self.head_known,
            "head_unknown" => &self.head_unknown,
            _ => unreachable!("fixed role list"),
        }
    }
}

impl Parameters for Branch {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.proj.tensors();
        out.extend(self.head_known.tensors());
        out.extend(self.head_unknown.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.proj.tensors_mut();
        out.extend(self.head_known.tensors_mut());
        out.extend(self.head_unknown.tensors_mut());
        out
    }
}

/// All trainable state: one [`Branch`] per active view, in view order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub branches: Vec<Branch>,
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(
        view_dims: &[(ViewId, usize)],
        hidden: usize,
        num_known: usize,
        num_unknown: usize,
        rng: &mut R,
    ) -> Self {
        let branches = view_dims
            .iter()
            .map(|&(view, dim)| Branch::init(view, dim, hidden, num_known, num_unknown, rng))
            .collect();
        Self { branches }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            branches: self.branches.iter().map(Branch::zeros_like).collect(),
        }
    }

    pub fn branch(&self, view: ViewId) -> Option<&Branch> {
        self.branches.iter().find(|b| b.view == view)
    }

    pub fn views(&self) -> Vec<ViewId> {
        self.branches.iter().map(|b| b.view).collect()
    }

    /// Tensors named `proj_token.w0`, `head_unknown_mask.b1`, and so on.
    pub fn to_tensors(&self) -> Vec<NamedTensor> {
        let mut out = Vec::new();
        for branch in &self.branches {
            for role in ROLES {
                let prefix = format!("{role}_{}", branch.view);
                for (l, layer) in branch.role(role).layers.iter().enumerate() {
                    out.push(NamedTensor::new(
                        format!("{prefix}.w{l}"),
                        layer.w.shape().to_vec(),
                        layer.w.iter().map(|&v| v as f32).collect(),
                    ));
                    out.push(NamedTensor::new(
                        format!("{prefix}.b{l}"),
                        layer.b.shape().to_vec(),
                        layer.b.iter().map(|&v| v as f32).collect(),
                    ));
                }
            }
        }
        out
    }

    pub fn from_tensors(tensors: &[NamedTensor]) -> Result<Self> {
        let mut views: Vec<ViewId> = Vec::new();
        for t in tensors {
            let (view, _, _, _) = parse_name(&t.name)?;
            if !views.contains(&view) {
                views.push(view);
            }
        }
        let branches = views
            .into_iter()
            .map(|view| {
                let mlp = |role: &str| collect_mlp(tensors, role, view);
                Ok(Branch {
                    view,
                    proj: mlp("proj")?,
                    head_known: mlp("head_known")?,
                    head_unknown: mlp("head_unknown")?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let params = Self { branches };
        params.check_shapes()?;
        Ok(params)
    }

    fn check_shapes(&self) -> Result<()> {
        for b in &self.branches {
            let h = b.proj.out_dim();
            if b.head_known.in_dim() != h || b.head_unknown.in_dim() != h {
                return Err(Error::Checkpoint(format!(
                    "{} heads do not accept the {h}-d projection",
                    b.view
                )));
            }
        }
        Ok(())
    }
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<&[f64]> {
        self.branches.iter().flat_map(|b| b.tensors()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.branches.iter_mut().flat_map(|b| b.tensors_mut()).collect()
    }
}

fn parse_name(name: &str) -> Result<(ViewId, &str, char, usize)> {
    let bad = || Error::Checkpoint(format!("unrecognized tensor name {name:?}"));
    let (prefix, param) = name.split_once('.').ok_or_else(bad)?;
    let (role, view) = prefix.rsplit_once('_').ok_or_else(bad)?;
    if !ROLES.contains(&role) {
        return Err(bad());
    }
    let view: ViewId = view.parse().map_err(|_| bad())?;
    let mut chars = param.chars();
    let kind = chars.next().filter(|c| *c == 'w' || *c == 'b').ok_or_else(bad)?;
    let layer: usize = chars.as_str().parse().map_err(|_| bad())?;
    Ok((view, role, kind, layer))
}

fn collect_mlp(tensors: &[NamedTensor], role: &str, view: ViewId) -> Result<Mlp> {
    let mut layers: Vec<(Option<Array2<f64>>, Option<Array1<f64>>)> = Vec::new();
    for t in tensors {
        let (v, r, kind, l) = parse_name(&t.name)?;
        if v != view || r != role {
            continue;
        }
        if layers.len() <= l {
            layers.resize(l + 1, (None, None));
        }
        let values: Vec<f64> = t.values.iter().map(|&v| f64::from(v)).collect();
        match (kind, t.shape.as_slice()) {
            ('w', &[rows, cols]) => {
                layers[l].0 = Some(
                    Array2::from_shape_vec((rows, cols), values)
                        .map_err(|e| Error::Checkpoint(format!("{}: {e}", t.name)))?,
                )
            }
            ('b', &[len]) if len == values.len() => layers[l].1 = Some(Array1::from(values)),
            _ => {
                return Err(Error::Checkpoint(format!(
                    "{} has unexpected shape {:?}",
                    t.name, t.shape
                )))
            }
        }
    }
    if layers.is_empty() {
        return Err(Error::Checkpoint(format!("missing {role}_{view} tensors")));
    }
    let layers = layers
        .into_iter()
        .enumerate()
        .map(|(l, pair)| match pair {
            (Some(w), Some(b)) if w.ncols() == b.len() => Ok(Dense { w, b }),
            _ => Err(Error::Checkpoint(format!(
                "{role}_{view} layer {l} is incomplete or inconsistent"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    for pair in layers.windows(2) {
        if pair[0].fan_out() != pair[1].fan_in() {
            return Err(Error::Checkpoint(format!(
                "{role}_{view} has inconsistent layer dims"
            )));
        }
    }
    Ok(Mlp { layers })
}
