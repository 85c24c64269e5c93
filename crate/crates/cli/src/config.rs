//! Optional `key = value` config files, merged under the command-line flags.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use jobvec::Error;

/// Flag arguments for every `key = value` line of `path`. Keys are long flag
/// names without the leading dashes; `true`/`false` toggle switches.
pub fn config_args(path: &Path) -> Result<Vec<OsString>, Error> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut args = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("{}:{}: expected `key = value`", path.display(), i + 1))
        })?;
        let key = key.trim().trim_start_matches("--");
        let value = value.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("{}:{}: empty key", path.display(), i + 1)));
        }
        match value {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            _ => {
                args.push(format!("--{key}").into());
                args.push(value.into());
            }
        }
    }
    Ok(args)
}

/// Splice config-file flags in right after the subcommand so that flags given
/// on the command line, which come later, override them.
pub fn merge_args(args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>, Error> {
    let mut out = Vec::with_capacity(args.len());
    let mut config = None;
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let text = arg.to_string_lossy();
        if text == "--config" {
            let path = iter
                .next()
                .ok_or_else(|| Error::Config("--config needs a file".into()))?;
            config = Some(path);
        } else if let Some(path) = text.strip_prefix("--config=") {
            config = Some(path.into());
        } else {
            out.push(arg);
        }
    }
    let Some(path) = config else {
        return Ok(out);
    };
    let extra = config_args(Path::new(&path))?;
    let at = out
        .iter()
        .position(|a| subcommands.contains(&a.to_string_lossy().as_ref()))
        .map(|i| i + 1)
        .ok_or_else(|| Error::Config("--config given without a subcommand".into()))?;
    out.splice(at..at, extra);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_lines_become_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "# training\nepochs = 5\nlenient=true\nstrict = false\n\nlr = 0.1 # fast\n").unwrap();
        let args: Vec<String> = config_args(&path)
            .unwrap()
            .into_iter()
            .map(|a| a.into_string().unwrap())
            .collect();
        assert_eq!(args, ["--epochs", "5", "--lenient", "--lr", "0.1"]);

        let merged = merge_args(
            ["jobvec", "--config", path.to_str().unwrap(), "train", "--epochs", "7"]
                .map(OsString::from)
                .to_vec(),
            &["train"],
        )
        .unwrap();
        let merged: Vec<String> = merged.into_iter().map(|a| a.into_string().unwrap()).collect();
        assert_eq!(merged, ["jobvec", "train", "--epochs", "5", "--lenient", "--lr", "0.1", "--epochs", "7"]);
    }

    #[test]
    fn bad_config_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        fs::write(&path, "epochs 5\n").unwrap();
        assert!(config_args(&path).is_err());
        assert!(config_args(&dir.path().join("missing.conf")).is_err());
        assert!(merge_args(vec!["jobvec".into(), "--config".into()], &["train"]).is_err());
    }
}
