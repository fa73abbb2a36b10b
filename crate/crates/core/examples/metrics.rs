//! Overlap and boundary metrics on two small masks.

use skipgraph::metrics::{dsc, hd95, mae, miou, Mask};

fn main() -> skipgraph::Result<()> {
    let truth = Mask::from_fn(16, 16, |y, x| (4..12).contains(&y) && (4..12).contains(&x));
    let pred = Mask::from_fn(16, 16, |y, x| (5..13).contains(&y) && (4..11).contains(&x));

    println!("DSC   {:.4}", dsc(&pred, &truth)?);
    println!("mIoU  {:.4}", miou(&pred, &truth)?);
    println!("HD95  {:.4} px", hd95(&pred, &truth)?);

    let as_f = |m: &Mask| m.data().iter().map(|&v| v as u8 as f64).collect::<Vec<_>>();
    println!("MAE   {:.4}", mae(&as_f(&pred), &as_f(&truth))?);

    // HD95 is undefined when either side is empty.
    let empty = Mask::from_fn(16, 16, |_, _| false);
    println!("empty: DSC {} / HD95 {}", dsc(&empty, &empty)?, hd95(&empty, &truth).unwrap_err());
    Ok(())
}
