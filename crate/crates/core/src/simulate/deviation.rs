//! Effort deviations for the incentive check, looked up by name.
//!
//! A deviation is written `name` or `name:arg`, e.g. `zero`, `double`, `scale:1.5`,
//! `const:2`.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// An effort policy the agent may follow instead of the recommended one.
pub trait Deviation: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    /// Effort exerted at continuation value `x` when `a_star` is recommended.
    fn effort(&self, x: f64, a_star: f64) -> f64;
}

#[derive(Debug)]
struct Baseline;

impl Deviation for Baseline {
    fn name(&self) -> String {
        "baseline".into()
    }
    fn effort(&self, _x: f64, a_star: f64) -> f64 {
        a_star
    }
}

#[derive(Debug)]
struct Scale {
    label: String,
    k: f64,
}

impl Deviation for Scale {
    fn name(&self) -> String {
        self.label.clone()
    }
    fn effort(&self, _x: f64, a_star: f64) -> f64 {
        self.k * a_star
    }
}

#[derive(Debug)]
struct Constant(f64);

impl Deviation for Constant {
    fn name(&self) -> String {
        if self.0 == 0.0 {
            "zero".into()
        } else {
            format!("const:{}", self.0)
        }
    }
    fn effort(&self, _x: f64, _a_star: f64) -> f64 {
        self.0
    }
}

type Builder = fn(Option<f64>) -> Result<Box<dyn Deviation>>;

pub struct DeviationRegistry {
    builders: BTreeMap<&'static str, Builder>,
}

fn no_arg(name: &str, arg: Option<f64>) -> Result<()> {
    match arg {
        None => Ok(()),
        Some(_) => Err(Error::Config(format!("deviation `{name}` takes no argument"))),
    }
}

fn nonneg_arg(name: &str, arg: Option<f64>) -> Result<f64> {
    match arg {
        Some(v) if v >= 0.0 && v.is_finite() => Ok(v),
        _ => Err(Error::Config(format!("deviation `{name}` needs a finite argument >= 0"))),
    }
}

impl Default for DeviationRegistry {
    fn default() -> Self {
        let mut r = Self {
            builders: BTreeMap::new(),
        };
        r.register("baseline", |a| {
            no_arg("baseline", a)?;
            Ok(Box::new(Baseline))
        });
        r.register("zero", |a| {
            no_arg("zero", a)?;
            Ok(Box::new(Constant(0.0)))
        });
        r.register("double", |a| {
            no_arg("double", a)?;
            Ok(Box::new(Scale {
                label: "double".into(),
                k: 2.0,
            }))
        });
        r.register("half", |a| {
            no_arg("half", a)?;
            Ok(Box::new(Scale {
                label: "half".into(),
                k: 0.5,
            }))
        });
        r.register("scale", |a| {
            let k = nonneg_arg("scale", a)?;
            Ok(Box::new(Scale {
                label: format!("scale:{k}"),
                k,
            }))
        });
        r.register("const", |a| Ok(Box::new(Constant(nonneg_arg("const", a)?))));
        r
    }
}

impl DeviationRegistry {
    pub fn register(&mut self, name: &'static str, builder: Builder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.builders.keys().copied()
    }

    pub fn parse(&self, text: &str) -> Result<Box<dyn Deviation>> {
        let text = text.trim();
        let (name, arg) = match text.split_once(':') {
            Some((n, a)) => {
                let v: f64 = a
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad deviation argument in `{text}`")))?;
                (n.trim(), Some(v))
            }
            None => (text, None),
        };
        let build = self.builders.get(name).ok_or_else(|| {
            let known: Vec<_> = self.names().collect();
            Error::Config(format!("unknown deviation `{name}` (known: {})", known.join(", ")))
        })?;
        build(arg)
    }

    /// Parses a comma-separated list.
    pub fn parse_list(&self, specs: &str) -> Result<Vec<Box<dyn Deviation>>> {
        specs
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| self.parse(s))
            .collect()
    }
}
