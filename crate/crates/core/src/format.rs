/// Formats a float with `digits` significant digits for CSV output.
pub(crate) fn sig(x: f64, digits: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        trim_zeros(&s)
    } else {
        let s = format!("{:.*e}", digits - 1, x);
        match s.split_once('e') {
            Some((mantissa, e)) => format!("{}e{}", trim_zeros(mantissa), e),
            None => s,
        }
    }
}

/// CSV numbers use 12 significant digits.
pub(crate) fn csv_num(x: f64) -> String {
    sig(x, 12)
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

pub(crate) fn csv_writer<W: std::io::Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(csv_num(1.0), "1");
        assert_eq!(csv_num(0.25), "0.25");
        assert_eq!(csv_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(csv_num(-1.015e-7), "-1.015e-7");
        assert_eq!(csv_num(2.5e40), "2.5e40");
        assert_eq!(csv_num(0.0), "0");
        let x: f64 = 123456.789012345;
        assert_eq!(csv_num(x), "123456.789012");
    }
}
