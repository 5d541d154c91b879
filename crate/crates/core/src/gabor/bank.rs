use std::fmt::Write as _;
use std::path::Path;

use super::{fit_gabor, ringach_point, FitOutcome, RingachPoint};
use crate::conv::kernel_convolve;
use crate::error::{Error, Result};
use crate::grid::Kernel;
use crate::io::{
    encode_kmat_list, list_files, list_item_as_kernel, load_kernel, parse_kmat_list, read_bytes, write_bytes,
};
use crate::parallel;

/// A non-empty list of equally sized filters.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    filters: Vec<Kernel>,
}

impl FilterBank {
    pub fn new(filters: Vec<Kernel>) -> Result<Self> {
        let Some(first) = filters.first() else {
            return Err(Error::Argument("a filter bank needs at least one filter".into()));
        };
        let side = first.side();
        if let Some((i, k)) = filters.iter().enumerate().find(|(_, k)| k.side() != side) {
            return Err(Error::Dimension(format!(
                "filter {i} is {0}x{0}, expected {side}x{side}",
                k.side()
            )));
        }
        Ok(Self { filters })
    }

    pub fn filters(&self) -> &[Kernel] {
        &self.filters
    }

    pub fn side(&self) -> usize {
        self.filters[0].side()
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `KBANK <count> <side>` followed by one KMAT body per filter.
    pub fn encode(&self) -> String {
        let labels: Vec<String> = (0..self.len()).map(|i| format!("filter {i}")).collect();
        let items: Vec<(&str, &crate::grid::Image)> = labels
            .iter()
            .zip(&self.filters)
            .map(|(l, k)| (l.as_str(), k.as_image()))
            .collect();
        encode_kmat_list("KBANK", &[self.len().to_string(), self.side().to_string()], &items)
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let list = parse_kmat_list(bytes, "KBANK")?;
        let header: Vec<usize> = list
            .args
            .iter()
            .map(|a| {
                a.parse()
                    .map_err(|_| Error::parse(0, format!("bad KBANK header field {a:?}")))
            })
            .collect::<Result<_>>()?;
        let [count, side] = header[..] else {
            return Err(Error::parse(0, "KBANK header needs <count> <side>"));
        };
        if list.items.len() != count {
            return Err(Error::parse(
                bytes.len(),
                format!("KBANK declares {count} filters, found {}", list.items.len()),
            ));
        }
        let filters = (0..count)
            .map(|i| {
                let k = list_item_as_kernel(&list, i)?;
                if k.side() != side {
                    return Err(Error::parse(
                        list.offsets[i],
                        format!("filter {i} is {0}x{0}, header says {side}", k.side()),
                    ));
                }
                Ok(k)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(filters)
    }
}

/// Reads a bank from a `KBANK` file or from every `.kmat` file of a
/// directory, in file-name order.
pub fn load_bank(path: impl AsRef<Path>) -> Result<FilterBank> {
    let path = path.as_ref();
    if path.is_dir() {
        let files = list_files(path, "kmat")?;
        let filters = files.iter().map(load_kernel).collect::<Result<Vec<_>>>()?;
        FilterBank::new(filters)
    } else {
        FilterBank::parse(&read_bytes(path)?)
    }
}

pub fn save_bank(path: impl AsRef<Path>, bank: &FilterBank) -> Result<()> {
    write_bytes(path.as_ref(), bank.encode().as_bytes())
}

/// Each filter replaced by its composition with `psi0`, cropped to the
/// filter's own size.
pub fn effective_bank(psi0: &Kernel, bank: &FilterBank) -> Result<FilterBank> {
    let filters = bank
        .filters()
        .iter()
        .map(|f| kernel_convolve(psi0, f, f.side()))
        .collect::<Result<Vec<_>>>()?;
    FilterBank::new(filters)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BankFit {
    pub index: usize,
    pub fit: FitOutcome,
    pub point: RingachPoint,
}

/// Fits every filter, in parallel when enabled; results keep bank order.
pub fn fit_bank(bank: &FilterBank) -> Result<Vec<BankFit>> {
    let indexed: Vec<(usize, &Kernel)> = bank.filters().iter().enumerate().collect();
    parallel::map(&indexed, |&(index, k)| {
        let fit = fit_gabor(k)?;
        Ok(BankFit {
            index,
            fit,
            point: ringach_point(&fit.params),
        })
    })
    .into_iter()
    .collect()
}

/// `filter_index,n_x,n_y,corr,theta,f,sigma_x,sigma_y`.
pub fn scatter_csv(fits: &[BankFit]) -> String {
    let mut out = String::from("filter_index,n_x,n_y,corr,theta,f,sigma_x,sigma_y\n");
    for b in fits {
        let p = &b.fit.params;
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            b.index, b.point.n_x, b.point.n_y, b.fit.corr, p.theta, p.f, p.sigma_x, p.sigma_y
        );
    }
    out
}
