use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use scb_core::codecs::{container, fit_linear_ae, BlockDctCodec, Codec, IdentityCodec, ZeroingCodec, DEFAULT_DELTA};
use scb_core::image::Dataset;

/// Codec named on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum CodecArg {
    Identity,
    Zeroing,
    BlockDct(u8),
    /// Fitted on the input images.
    LinearAe { r: usize, delta: f64 },
    Model(PathBuf),
}

impl FromStr for CodecArg {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.splitn(3, ':');
        let kind = parts.next().unwrap_or_default();
        let a = parts.next();
        let b = parts.next();
        Ok(match (kind, a, b) {
            ("identity", None, None) => CodecArg::Identity,
            ("zeroing", None, None) => CodecArg::Zeroing,
            ("block_dct", Some(q), None) => CodecArg::BlockDct(q.parse().with_context(|| format!("block_dct quality `{q}`"))?),
            ("linear_ae", Some(r), d) => CodecArg::LinearAe {
                r: r.parse().with_context(|| format!("linear_ae rank `{r}`"))?,
                delta: d.map(str::parse).transpose().with_context(|| format!("linear_ae step `{}`", d.unwrap_or("")))?.unwrap_or(DEFAULT_DELTA),
            },
            ("model", Some(p), rest) => {
                // Paths may contain ':'.
                let mut path = p.to_string();
                if let Some(rest) = rest {
                    path.push(':');
                    path.push_str(rest);
                }
                CodecArg::Model(path.into())
            }
            _ => bail!("unknown codec `{s}`; expected identity, zeroing, block_dct:Q, linear_ae:R[:DELTA] or model:PATH"),
        })
    }
}

impl CodecArg {
    pub fn build(&self, train: &Dataset) -> Result<Box<dyn Codec>> {
        Ok(match self {
            CodecArg::Identity => Box::new(IdentityCodec),
            CodecArg::Zeroing => Box::new(ZeroingCodec),
            CodecArg::BlockDct(q) => Box::new(BlockDctCodec::new(*q)?),
            CodecArg::LinearAe { r, delta } => Box::new(fit_linear_ae(train, *r)?.with_delta(*delta)?),
            CodecArg::Model(p) => Box::new(container::load(p).with_context(|| p.display().to_string())?),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses() {
        assert_eq!("identity".parse::<CodecArg>().unwrap(), CodecArg::Identity);
        assert_eq!("block_dct:50".parse::<CodecArg>().unwrap(), CodecArg::BlockDct(50));
        assert_eq!(
            "linear_ae:8".parse::<CodecArg>().unwrap(),
            CodecArg::LinearAe { r: 8, delta: DEFAULT_DELTA }
        );
        assert_eq!(
            "linear_ae:8:0.5".parse::<CodecArg>().unwrap(),
            CodecArg::LinearAe { r: 8, delta: 0.5 }
        );
        assert_eq!("model:C:/x.scbm".parse::<CodecArg>().unwrap(), CodecArg::Model("C:/x.scbm".into()));
        assert!("block_dct".parse::<CodecArg>().is_err());
        assert!("jpeg:3".parse::<CodecArg>().is_err());
    }
}
