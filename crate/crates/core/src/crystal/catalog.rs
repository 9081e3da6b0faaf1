use super::{validate_triple, CrystalError, CrystalTriple, Lattice};
use crate::linalg::{rational, Mat, Rational};

/// Upper bound on generated point groups; the largest crystallographic
/// point group in dimension 3 has 48 elements.
const MAX_GROUP_ORDER: usize = 48;

const NAMES_1D: &[&str] = &["p1", "p1m"];
const NAMES_2D: &[&str] = &["p1", "pm", "pmm", "p2", "p4", "p4m"];

fn int_mat(rows: &[&[i64]]) -> Mat<Rational> {
    Mat::from_rows(
        rows.iter()
            .map(|r| r.iter().map(|&v| rational(v, 1)).collect())
            .collect(),
    )
    .expect("catalog matrices are well formed")
}

pub fn catalog_names(dim: usize) -> &'static [&'static str] {
    match dim {
        1 => NAMES_1D,
        2 => NAMES_2D,
        _ => &["p1"],
    }
}

/// Point group elements of a catalog entry on `ℤ^d`, identity first.
pub fn catalog_elements(name: &str, dim: usize) -> Result<Vec<Mat<Rational>>, CrystalError> {
    let unknown = || CrystalError::UnknownCatalog {
        name: name.to_string(),
        dim,
    };
    if dim == 0 {
        return Err(unknown());
    }
    let generators = match (name, dim) {
        ("p1", _) => vec![],
        ("p1m", 1) => vec![int_mat(&[&[-1]])],
        ("pm", 2) => vec![int_mat(&[&[1, 0], &[0, -1]])],
        ("pmm", 2) => vec![int_mat(&[&[1, 0], &[0, -1]]), int_mat(&[&[-1, 0], &[0, 1]])],
        ("p2", 2) => vec![int_mat(&[&[-1, 0], &[0, -1]])],
        ("p4", 2) => vec![int_mat(&[&[0, -1], &[1, 0]])],
        ("p4m", 2) => vec![int_mat(&[&[0, -1], &[1, 0]]), int_mat(&[&[1, 0], &[0, -1]])],
        _ => return Err(unknown()),
    };
    generate_group(&generators, dim)
}

/// Triple of a catalog group over the integer lattice.
pub fn catalog_group(name: &str, dim: usize) -> Result<CrystalTriple, CrystalError> {
    validate_triple(Lattice::standard(dim), catalog_elements(name, dim)?)
}

/// Closure of the generators under multiplication, identity first and the
/// rest in discovery order.
pub fn generate_group(
    generators: &[Mat<Rational>],
    dim: usize,
) -> Result<Vec<Mat<Rational>>, CrystalError> {
    for (i, g) in generators.iter().enumerate() {
        if g.rows() != dim || g.cols() != dim {
            return Err(CrystalError::Dimension(i));
        }
    }
    let mut elements = vec![Mat::<Rational>::identity(dim)];
    let mut frontier = 0;
    while frontier < elements.len() {
        let current = elements[frontier].clone();
        frontier += 1;
        for g in generators {
            let next = &current * g;
            if !elements.contains(&next) {
                if elements.len() == MAX_GROUP_ORDER {
                    return Err(CrystalError::GroupTooLarge(MAX_GROUP_ORDER));
                }
                elements.push(next);
            }
        }
    }
    Ok(elements)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_orders() {
        let expect = [
            ("p1", 1, 1),
            ("p1m", 1, 2),
            ("p1", 2, 1),
            ("pm", 2, 2),
            ("pmm", 2, 4),
            ("p2", 2, 2),
            ("p4", 2, 4),
            ("p4m", 2, 8),
            ("p1", 3, 1),
        ];
        for (name, dim, order) in expect {
            let t = catalog_group(name, dim).unwrap();
            assert_eq!(t.order(), order, "{name}");
            assert_eq!(t.group().element(0), &Mat::identity(dim));
        }
    }

    #[test]
    fn unknown_names_rejected() {
        assert!(matches!(
            catalog_group("p4m", 1),
            Err(CrystalError::UnknownCatalog { .. })
        ));
        assert!(catalog_group("p6", 2).is_err());
    }

    #[test]
    fn shear_generates_too_much() {
        let shear = int_mat(&[&[1, 1], &[0, 1]]);
        assert_eq!(
            generate_group(&[shear], 2).unwrap_err(),
            CrystalError::GroupTooLarge(MAX_GROUP_ORDER)
        );
    }
}
