use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Mean losses after one training epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub validation: Option<f64>,
}

/// `epoch,train_loss,val_loss`, the last column empty when there is no
/// validation set.
pub fn history_csv(history: &[EpochLoss]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss\n");
    for row in history {
        let val = row.validation.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", row.epoch, row.train, val));
    }
    out
}

pub fn write_history_csv(history: &[EpochLoss], path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, history_csv(history))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let h = vec![
            EpochLoss { epoch: 1, train: 0.5, validation: Some(0.25) },
            EpochLoss { epoch: 2, train: 0.125, validation: None },
        ];
        assert_eq!(history_csv(&h), "epoch,train_loss,val_loss\n1,0.5,0.25\n2,0.125,\n");
    }
}
