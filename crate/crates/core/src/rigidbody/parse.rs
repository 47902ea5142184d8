//! Loader for the block-structured model description.
//!
//! ```text
//! # two-link planar arm
//! joint { name = j1, parent = base, axis = [0, 0, 1], origin_xyz = [0, 0, 0],
//!         origin_rpy = [0, 0, 0], limits = [-3.1, 3.1], vel_limit = 2.0 }
//! frame { name = tip, parent_joint = j1, offset_xyz = [0.3, 0, 0] }
//! sphere { name = torso, parent_joint = base, offset_xyz = [0, 0, 0], radius = 0.1 }
//! cbf_pair { frame = tip, sphere = torso, limb_radius = 0.02, margin = 0.01 }
//! ```
//!
//! Fields are separated by commas or newlines. Parents are given as `base`,
//! a joint name, or a joint index.

use std::collections::BTreeMap;

use nalgebra::{Unit, Vector3};

use super::{FrameSpec, JointSpec, Pose, RobotModel};
use crate::safety::{CbfPair, CollisionSphere};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Word(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Eq,
    Sep,
}

#[derive(Debug, Clone)]
enum Value {
    Word(String),
    List(Vec<f64>),
}

struct Block {
    kind: String,
    line: usize,
    fields: BTreeMap<String, (usize, Value)>,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut chars = content.chars().peekable();
        while let Some(&c) = chars.peek() {
            match c {
                c if c.is_whitespace() => {
                    chars.next();
                }
                '{' | '}' | '[' | ']' | '=' | ',' => {
                    chars.next();
                    out.push((
                        line,
                        match c {
                            '{' => Token::LBrace,
                            '}' => Token::RBrace,
                            '[' => Token::LBracket,
                            ']' => Token::RBracket,
                            '=' => Token::Eq,
                            _ => Token::Sep,
                        },
                    ));
                }
                '"' => {
                    chars.next();
                    let mut s = String::new();
                    loop {
                        match chars.next() {
                            Some('"') => break,
                            Some(ch) => s.push(ch),
                            None => {
                                return Err(Error::Parse {
                                    line,
                                    message: "unterminated string".into(),
                                })
                            }
                        }
                    }
                    out.push((line, Token::Word(s)));
                }
                c if c.is_alphanumeric() || "_.+-".contains(c) => {
                    let mut s = String::new();
                    while let Some(&ch) = chars.peek() {
                        if ch.is_alphanumeric() || "_.+-".contains(ch) {
                            s.push(ch);
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    out.push((line, Token::Word(s)));
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        }
        out.push((line, Token::Sep));
    }
    Ok(out)
}

fn parse_number(line: usize, s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a number, found `{s}`"),
    })
}

fn parse_blocks(text: &str) -> Result<Vec<Block>> {
    let tokens = tokenize(text)?;
    let mut it = tokens.into_iter().peekable();
    let mut blocks = Vec::new();
    let last_line = text.lines().count().max(1);
    let eof = |what: &str| Error::Parse {
        line: last_line,
        message: format!("unexpected end of input, expected {what}"),
    };

    while let Some((line, tok)) = it.next() {
        let kind = match tok {
            Token::Sep => continue,
            Token::Word(w) => w,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected a block name, found {other:?}"),
                })
            }
        };
        loop {
            match it.next() {
                Some((_, Token::Sep)) => continue,
                Some((_, Token::LBrace)) => break,
                Some((l, t)) => {
                    return Err(Error::Parse {
                        line: l,
                        message: format!("expected `{{` after `{kind}`, found {t:?}"),
                    })
                }
                None => return Err(eof("`{`")),
            }
        }
        let mut fields = BTreeMap::new();
        loop {
            let (kline, key) = match it.next() {
                Some((_, Token::Sep)) => continue,
                Some((_, Token::RBrace)) => break,
                Some((l, Token::Word(w))) => (l, w),
                Some((l, t)) => {
                    return Err(Error::Parse {
                        line: l,
                        message: format!("expected a field name, found {t:?}"),
                    })
                }
                None => return Err(eof("`}`")),
            };
            match it.next() {
                Some((_, Token::Eq)) => {}
                _ => {
                    return Err(Error::Parse {
                        line: kline,
                        message: format!("expected `=` after `{key}`"),
                    })
                }
            }
            let value = match it.next() {
                Some((_, Token::Word(w))) => Value::Word(w),
                Some((_, Token::LBracket)) => {
                    let mut items = Vec::new();
                    loop {
                        match it.next() {
                            Some((_, Token::RBracket)) => break,
                            Some((_, Token::Sep)) => continue,
                            Some((l, Token::Word(w))) => items.push(parse_number(l, &w)?),
                            Some((l, t)) => {
                                return Err(Error::Parse {
                                    line: l,
                                    message: format!("unexpected {t:?} inside list"),
                                })
                            }
                            None => return Err(eof("`]`")),
                        }
                    }
                    Value::List(items)
                }
                _ => {
                    return Err(Error::Parse {
                        line: kline,
                        message: format!("missing value for `{key}`"),
                    })
                }
            };
            if fields.insert(key.clone(), (kline, value)).is_some() {
                return Err(Error::Parse {
                    line: kline,
                    message: format!("duplicate field `{key}`"),
                });
            }
        }
        blocks.push(Block { kind, line, fields });
    }
    Ok(blocks)
}

impl Block {
    fn take(&mut self, key: &str) -> Result<(usize, Value)> {
        self.fields.remove(key).ok_or_else(|| Error::Parse {
            line: self.line,
            message: format!("`{}` block is missing field `{key}`", self.kind),
        })
    }

    fn word(&mut self, key: &str) -> Result<String> {
        match self.take(key)? {
            (_, Value::Word(w)) => Ok(w),
            (line, Value::List(_)) => Err(Error::Parse {
                line,
                message: format!("field `{key}` must be a scalar"),
            }),
        }
    }

    fn number(&mut self, key: &str) -> Result<f64> {
        match self.take(key)? {
            (line, Value::Word(w)) => parse_number(line, &w),
            (line, Value::List(_)) => Err(Error::Parse {
                line,
                message: format!("field `{key}` must be a number"),
            }),
        }
    }

    fn list<const N: usize>(&mut self, key: &str) -> Result<[f64; N]> {
        match self.take(key)? {
            (line, Value::List(v)) => v.try_into().map_err(|v: Vec<f64>| Error::Parse {
                line,
                message: format!("field `{key}` needs {N} entries, found {}", v.len()),
            }),
            (line, Value::Word(_)) => Err(Error::Parse {
                line,
                message: format!("field `{key}` must be a list"),
            }),
        }
    }

    fn optional_list<const N: usize>(&mut self, key: &str) -> Result<Option<[f64; N]>> {
        if self.fields.contains_key(key) {
            self.list(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn finish(self) -> Result<()> {
        match self.fields.into_iter().next() {
            Some((key, (line, _))) => Err(Error::Parse {
                line,
                message: format!("unknown field `{key}` in `{}` block", self.kind),
            }),
            None => Ok(()),
        }
    }
}

fn resolve_parent(line: usize, what: &str, raw: &str, names: &[String]) -> Result<Option<usize>> {
    if raw == "base" {
        return Ok(None);
    }
    if let Ok(idx) = raw.parse::<usize>() {
        return Ok(Some(idx));
    }
    names
        .iter()
        .position(|n| n == raw)
        .map(Some)
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("{what} references unknown joint `{raw}`"),
        })
}

/// Parse and validate a model description.
pub fn load_model(text: &str) -> Result<RobotModel> {
    let mut joints: Vec<JointSpec> = Vec::new();
    let mut frames = Vec::new();
    let mut spheres = Vec::new();
    let mut pairs = Vec::new();
    let mut names: Vec<String> = Vec::new();

    for mut block in parse_blocks(text)? {
        let line = block.line;
        match block.kind.as_str() {
            "joint" => {
                let name = block.word("name")?;
                let parent_raw = block.word("parent")?;
                if let Some((tline, Value::Word(t))) = block.fields.remove("type") {
                    if t != "revolute" {
                        return Err(Error::Parse {
                            line: tline,
                            message: format!(
                                "joint `{name}`: only revolute joints are supported, found `{t}`"
                            ),
                        });
                    }
                }
                // A joint may only reference joints declared before it; a
                // self/forward reference is a topology error.
                let parent = if parent_raw == name {
                    Some(names.len())
                } else if let Ok(idx) = parent_raw.parse::<usize>() {
                    Some(idx)
                } else if parent_raw == "base" {
                    None
                } else {
                    match names.iter().position(|n| *n == parent_raw) {
                        Some(i) => Some(i),
                        None => {
                            return Err(Error::Topology {
                                joint: name,
                                message: format!(
                                    "parent `{parent_raw}` is not declared before this joint"
                                ),
                            })
                        }
                    }
                };
                let axis = Vector3::from(block.list::<3>("axis")?);
                let norm = axis.norm();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "joint `{name}`: axis must have unit norm (|axis| = {norm})"
                        ),
                    });
                }
                let xyz = block.optional_list::<3>("origin_xyz")?.unwrap_or([0.0; 3]);
                let rpy = block.optional_list::<3>("origin_rpy")?.unwrap_or([0.0; 3]);
                let [lower, upper] = block.list::<2>("limits")?;
                let velocity_limit = block.number("vel_limit")?;
                block.finish()?;
                if !(lower < upper) {
                    return Err(Error::Limits {
                        joint: name,
                        lower,
                        upper,
                    });
                }
                if xyz.iter().chain(rpy.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::Parse {
                        line,
                        message: format!("joint `{name}`: origin must be finite"),
                    });
                }
                if let Some(p) = parent {
                    if p >= joints.len() {
                        return Err(Error::Topology {
                            joint: name,
                            message: format!(
                                "parent index {p} is not before own index {}",
                                joints.len()
                            ),
                        });
                    }
                }
                names.push(name.clone());
                joints.push(JointSpec {
                    name,
                    parent,
                    axis: Unit::new_unchecked(axis),
                    origin: Pose::from_xyz_rpy(xyz, rpy),
                    lower,
                    upper,
                    velocity_limit,
                });
            }
            "frame" => {
                let name = block.word("name")?;
                let parent_raw = block.word("parent_joint")?;
                let parent_joint = resolve_parent(line, "frame", &parent_raw, &names)?;
                let offset =
                    Vector3::from(block.optional_list::<3>("offset_xyz")?.unwrap_or([0.0; 3]));
                block.finish()?;
                frames.push(FrameSpec {
                    name,
                    parent_joint,
                    offset,
                });
            }
            "sphere" => {
                let name = block.word("name")?;
                let parent_raw = block.word("parent_joint")?;
                let parent_joint = resolve_parent(line, "sphere", &parent_raw, &names)?;
                let offset =
                    Vector3::from(block.optional_list::<3>("offset_xyz")?.unwrap_or([0.0; 3]));
                let radius = block.number("radius")?;
                block.finish()?;
                spheres.push(CollisionSphere {
                    name,
                    parent_joint,
                    offset,
                    radius,
                });
            }
            "cbf_pair" => {
                let frame = block.word("frame")?;
                let sphere = block.word("sphere")?;
                let limb_radius = block.number("limb_radius")?;
                let margin = block.number("margin")?;
                block.finish()?;
                pairs.push(CbfPair {
                    frame,
                    sphere,
                    limb_radius,
                    margin,
                });
            }
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("unknown block `{other}`"),
                })
            }
        }
    }
    RobotModel::new(joints, frames, spheres, pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLANAR_2R: &str = r#"
# planar two-link arm
joint { name = j1, parent = base, axis = [0, 0, 1], limits = [-3.1, 3.1], vel_limit = 2 }
joint {
    name = j2
    parent = j1
    axis = [0, 0, 1]
    origin_xyz = [0.3, 0, 0]
    limits = [-3.1, 3.1]
    vel_limit = 2
}
frame { name = tip, parent_joint = j2, offset_xyz = [0.3, 0, 0] }
"#;

    #[test]
    fn loads_planar_arm() {
        let model = load_model(PLANAR_2R).unwrap();
        assert_eq!(model.dof(), 2);
        assert_eq!(model.joints()[1].parent, Some(0));
        assert_eq!(model.frame("tip").unwrap().parent_joint, Some(1));
    }

    #[test]
    fn self_parent_is_topology_error() {
        let text =
            "joint { name = a, parent = 0, axis = [0,0,1], limits = [-1, 1], vel_limit = 1 }";
        assert!(matches!(load_model(text), Err(Error::Topology { .. })));
        let text =
            "joint { name = a, parent = a, axis = [0,0,1], limits = [-1, 1], vel_limit = 1 }";
        assert!(matches!(load_model(text), Err(Error::Topology { .. })));
    }

    #[test]
    fn forward_parent_is_topology_error() {
        let text = "joint { name = a, parent = b, axis = [0,0,1], limits = [-1, 1], vel_limit = 1 }\n\
                    joint { name = b, parent = base, axis = [0,0,1], limits = [-1, 1], vel_limit = 1 }";
        assert!(matches!(load_model(text), Err(Error::Topology { .. })));
    }

    #[test]
    fn inverted_limits_rejected() {
        let text =
            "joint { name = a, parent = base, axis = [0,0,1], limits = [1, 1], vel_limit = 1 }";
        assert!(matches!(load_model(text), Err(Error::Limits { .. })));
    }

    #[test]
    fn prismatic_rejected() {
        let text = "joint { name = a, type = prismatic, parent = base, axis = [0,0,1], limits = [0, 1], vel_limit = 1 }";
        assert!(matches!(
            load_model(text),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn parse_errors_carry_line() {
        let text = "\n\njoint { name = a, parent = base, axis = [0,0,1], limits = [-1, x], vel_limit = 1 }";
        match load_model(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "joint { name = a, parent = base, axis = [0,0,1], limits = [-1, 1] }";
        assert!(matches!(load_model(text), Err(Error::Parse { .. })));
        let text = "joint { name = a, parent = base, axis = [0,0,1], limits = [-1, 1], vel_limit = 1, colour = red }";
        assert!(matches!(load_model(text), Err(Error::Parse { .. })));
        let text =
            "joint { name = a, parent = base, axis = [0,0,2], limits = [-1, 1], vel_limit = 1 }";
        assert!(matches!(load_model(text), Err(Error::Parse { .. })));
    }

    #[test]
    fn cbf_pair_must_reference_existing_items() {
        let text = format!(
            "{PLANAR_2R}\ncbf_pair {{ frame = tip, sphere = nope, limb_radius = 0, margin = 0 }}"
        );
        assert!(matches!(load_model(&text), Err(Error::UnknownSphere(_))));
    }
}
