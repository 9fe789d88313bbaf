//! ROUGE, BLEU and embedding cosine on a few prediction/reference pairs.

use lectern_core::embedding::HashEmbedder;
use lectern_core::eval::{bleu, cosine_metric, rouge_l, rouge_n};

fn main() {
    let pairs = [
        ("the cat on mat", "the cat sat on the mat"),
        (
            "gradient descent lowers the loss",
            "gradient descent minimizes the loss",
        ),
        ("pooling downsamples", "dropout zeroes random units"),
    ];
    let embedder = HashEmbedder::default();
    println!(
        "{:<36} {:>7} {:>7} {:>7} {:>7}",
        "prediction", "R1-F1", "R2-F1", "RL-F1", "cos"
    );
    for (pred, reference) in pairs {
        println!(
            "{:<36} {:>7.4} {:>7.4} {:>7.4} {:>7.4}",
            pred,
            rouge_n(pred, reference, 1).unwrap().f1,
            rouge_n(pred, reference, 2).unwrap().f1,
            rouge_l(pred, reference).unwrap().f1,
            cosine_metric(pred, reference, &embedder).unwrap()
        );
    }
    let preds: Vec<&str> = pairs.iter().map(|p| p.0).collect();
    let refs: Vec<&str> = pairs.iter().map(|p| p.1).collect();
    println!("corpus BLEU-4: {:.4}", bleu(&preds, &refs).unwrap());
}
