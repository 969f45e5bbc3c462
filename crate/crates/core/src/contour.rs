//! Marching squares on a rectangular grid, with linear interpolation along
//! cell edges and no smoothing.

/// Zero level set of `values` (row-major, `values[j * nx + i]` at
/// `(xs[i], ys[j])`). Cells touching a `None` sample are skipped. Segments
/// are joined into polylines where endpoints coincide.
pub fn zero_contour(xs: &[f64], ys: &[f64], values: &[Option<f64>]) -> Vec<Vec<(f64, f64)>> {
    let (nx, ny) = (xs.len(), ys.len());
    assert_eq!(values.len(), nx * ny);
    let at = |i: usize, j: usize| values[j * nx + i];
    let mut segments: Vec<[(f64, f64); 2]> = Vec::new();
    if nx < 2 || ny < 2 {
        return Vec::new();
    }

    // crossing on the edge between two grid nodes, computed from the node
    // with the smaller index so that neighbouring cells agree bit for bit
    let cross = |a: (usize, usize), b: (usize, usize)| -> (f64, f64) {
        let (p, q) = if (a.1, a.0) <= (b.1, b.0) { (a, b) } else { (b, a) };
        let (vp, vq) = (at(p.0, p.1).unwrap(), at(q.0, q.1).unwrap());
        let t = if vp == vq { 0.5 } else { vp / (vp - vq) };
        (
            xs[p.0] + t * (xs[q.0] - xs[p.0]),
            ys[p.1] + t * (ys[q.1] - ys[p.1]),
        )
    };

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            // corners counter-clockwise from bottom-left
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let vals: Option<Vec<f64>> = corners.iter().map(|&(a, b)| at(a, b)).collect();
            let Some(vals) = vals else { continue };
            let mut code = 0;
            for (k, v) in vals.iter().enumerate() {
                if *v >= 0.0 {
                    code |= 1 << k;
                }
            }
            if code == 0 || code == 15 {
                continue;
            }
            let edge = |e: usize| cross(corners[e], corners[(e + 1) % 4]);
            let crossing: Vec<usize> = (0..4)
                .filter(|&e| (vals[e] >= 0.0) != (vals[(e + 1) % 4] >= 0.0))
                .collect();
            if crossing.len() == 2 {
                segments.push([edge(crossing[0]), edge(crossing[1])]);
            } else {
                // saddle: resolve with the cell-centre average
                let centre = vals.iter().sum::<f64>() / 4.0;
                let pairs = if (centre >= 0.0) == (vals[0] >= 0.0) {
                    [(1, 2), (3, 0)]
                } else {
                    [(0, 1), (2, 3)]
                };
                for (a, b) in pairs {
                    segments.push([edge(a), edge(b)]);
                }
            }
        }
    }
    join(segments)
}

fn join(mut segments: Vec<[(f64, f64); 2]>) -> Vec<Vec<(f64, f64)>> {
    let mut lines: Vec<Vec<(f64, f64)>> = Vec::new();
    while let Some(seg) = segments.pop() {
        let mut line = vec![seg[0], seg[1]];
        loop {
            let tail = *line.last().unwrap();
            let head = line[0];
            let next = segments.iter().position(|s| s[0] == tail || s[1] == tail);
            if let Some(k) = next {
                let s = segments.swap_remove(k);
                line.push(if s[0] == tail { s[1] } else { s[0] });
                continue;
            }
            let prev = segments.iter().position(|s| s[0] == head || s[1] == head);
            if let Some(k) = prev {
                let s = segments.swap_remove(k);
                line.insert(0, if s[0] == head { s[1] } else { s[0] });
                continue;
            }
            break;
        }
        if line.first() != line.last() && line.last() < line.first() {
            line.reverse();
        }
        lines.push(line);
    }
    lines.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap_or(std::cmp::Ordering::Equal));
    lines
}
