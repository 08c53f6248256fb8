//! How the class-pair margin moves the class-level loss under each sign convention.

use langsep::losses::{class_centroids, class_contrastive, BatchEmbeddings};
use langsep::{LabelSpace, MarginMode, MarginTable};

fn main() -> langsep::Result<()> {
    let space = LabelSpace::from_codes(&["es", "pt", "en"])?;
    let unit = |x: f64, y: f64| {
        let n = (x * x + y * y).sqrt();
        vec![x / n, y / n]
    };
    // Spanish and Portuguese rows sit close together; English is far away.
    let z = vec![unit(1.0, 0.1), unit(1.0, 0.2), unit(1.0, 0.3), unit(1.0, 0.4), unit(-1.0, 0.2), unit(-1.0, 0.3)];
    let labels = vec![Some(0), Some(0), Some(1), Some(1), Some(2), Some(2)];
    let batch = BatchEmbeddings::new(z, labels)?;
    let cents = class_centroids(&batch)?;

    println!("{:>8} {:>12} {:>12}", "δ_high", "as_written", "enforcing");
    for delta in [0.01, 0.2, 0.4, 0.8, 1.6] {
        let table = MarginTable::new(delta, 0.0, [(space.in_domain()[0].clone(), space.in_domain()[1].clone())])?;
        let m = table.resolve(&space)?;
        let (a, _) = class_contrastive(&batch, &cents, &m, 0.07, MarginMode::AsWritten)?;
        let (e, _) = class_contrastive(&batch, &cents, &m, 0.07, MarginMode::Enforcing)?;
        println!("{delta:>8} {a:>12.5} {e:>12.5}");
    }
    Ok(())
}
