// Temporary fixture generator (deleted before release).
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn half_step(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let lo = (lo * 2.0).round() / 2.0;
    let steps = ((hi - lo) * 2.0).floor() as i64;
    lo + rng.random_range(0..=steps) as f64 * 0.5
}

fn gre(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
    rng.random_range(lo..=hi)
}

fn gpa(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo..hi) * 100.0).round() / 100.0
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(20260810);
    let mut unranked = String::from(
        "category,self_gre_writing,self_gre_verbal,self_gre_quant,official_gre_writing,official_gre_verbal,official_gre_quant,gpa,lor1,lor2,lor3\n",
    );

    // (category, count, writing range, verbal range, quant range, gpa range, letter range)
    let groups = [
        ("fellowship", 40, (4.0, 6.0), (155, 170), (160, 170), (3.55, 3.99), (2.0, 3.0)),
        ("admit", 40, (3.5, 5.5), (150, 166), (155, 169), (3.2, 3.9), (1.5, 3.0)),
        ("deny", 45, (2.0, 5.0), (135, 163), (140, 166), (1.6, 3.6), (0.5, 2.5)),
    ];
    for (idx, (cat, count, wr, vr, qr, gr, lr)) in groups.iter().enumerate() {
        for k in 0..*count {
            let w = half_step(&mut rng, wr.0, wr.1);
            let v = gre(&mut rng, vr.0, vr.1);
            let q = gre(&mut rng, qr.0, qr.1);
            let g = gpa(&mut rng, gr.0, gr.1);
            let l1 = half_step(&mut rng, lr.0, lr.1);
            let l2 = half_step(&mut rng, lr.0, lr.1);
            let l3 = half_step(&mut rng, lr.0, lr.1);
            // First fellowship candidate carries perfect letters (LoR = e^3).
            let (l1, l2, l3) = if idx == 0 && k == 0 {
                (3.0, 3.0, 3.0)
            } else {
                (l1, l2, l3)
            };
            // A few candidates only have self-reported GRE scores.
            if k % 11 == 3 {
                unranked.push_str(&format!(
                    "{cat},{w},{v},{q},,,,{g},{l1},{l2},{l3}\n"
                ));
            } else if k % 7 == 5 {
                // official partially present; self fills the rest
                unranked.push_str(&format!(
                    "{cat},{w},{v},,,,{q},{g},{l1},{l2},\n"
                ));
            } else {
                unranked.push_str(&format!(
                    "{cat},,,,{w},{v},{q},{g},{l1},{l2},{l3}\n"
                ));
            }
        }
    }
    // Defective rows exercising the drop paths.
    unranked.push_str("deny,,,,3.0,150,160,4.7,1.0,1.0,1.0\n"); // gpa out of range
    unranked.push_str("admit,,,,4.0,152,,3.4,2.0,,\n"); // missing quant everywhere
    unranked.push_str("deny,,,,2.5,140,150,2.2,,,\n"); // no letters -> no LoR
    std::fs::write("/root/crate/crates/prefmetric-cli/tests/fixtures/unranked.csv", unranked)
        .unwrap();

    // Ranked fixture: score multiset pinned so that candidates with equal
    // scores leave exactly 2610 comparable pairs out of C(88,2) = 3828.
    let score_counts: [(u8, usize); 10] = [
        (1, 1),
        (2, 1),
        (3, 2),
        (4, 2),
        (5, 2),
        (6, 4),
        (7, 5),
        (8, 8),
        (9, 17),
        (10, 46),
    ];
    let mut ranked = String::from("score,gre_writing,gre_verbal,gre_quant,gpa\n");
    for (score, count) in score_counts {
        for _ in 0..count {
            // Better (lower) scores lean toward stronger features.
            let s = score as f64;
            let quality = 1.0 - (s - 1.0) / 9.0;
            let w = half_step(&mut rng, 2.0 + 2.0 * quality, 4.0 + 2.0 * quality);
            let v = gre(
                &mut rng,
                (140.0 + 15.0 * quality) as i64,
                (155.0 + 15.0 * quality) as i64,
            );
            let q = gre(
                &mut rng,
                (145.0 + 15.0 * quality) as i64,
                (155.0 + 15.0 * quality) as i64,
            );
            let g = gpa(&mut rng, 2.0 + 1.4 * quality, 2.6 + 1.4 * quality);
            ranked.push_str(&format!("{score},{w},{v},{q},{g}\n"));
        }
    }
    // One defective row (missing gpa) that ingestion must drop: 89 rows in,
    // 88 usable.
    ranked.push_str("9,3.5,150,155,\n");
    std::fs::write("/root/crate/crates/prefmetric-cli/tests/fixtures/ranked.csv", ranked).unwrap();
    println!("fixtures written");
}
