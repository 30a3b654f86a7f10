use super::{format_number, Cell, Dataset};

/// Writes `ds` as CSV: a header row of attribute names, then one record per
/// row. Missing cells become empty fields.
pub fn write_csv(ds: &Dataset) -> String {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer
        .write_record(ds.attributes.iter().map(|a| a.name.as_str()))
        .expect("writing to a Vec cannot fail");
    for row in &ds.rows {
        let fields = row.iter().zip(&ds.attributes).map(|(cell, attr)| match cell {
            Cell::Missing => String::new(),
            Cell::Number(v) => format_number(*v),
            Cell::Category(i) => attr.kind.labels().expect("validated nominal")[*i].clone(),
            Cell::Text(s) => s.clone(),
        });
        writer.write_record(fields).expect("writing to a Vec cannot fail");
    }
    let bytes = writer.into_inner().expect("flushing a Vec cannot fail");
    String::from_utf8(bytes).expect("fields are UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formats::{AttributeSpec, Dataset};

    #[test]
    fn quotes_and_missing() {
        let ds = Dataset::new(
            "r",
            vec![AttributeSpec::string("s, t"), AttributeSpec::numeric("n")],
            vec![
                vec![Cell::Text("say \"hi\"".into()), Cell::Missing],
                vec![Cell::Missing, Cell::Number(0.5)],
            ],
        )
        .unwrap();
        let out = write_csv(&ds);
        assert_eq!(out, "\"s, t\",n\n\"say \"\"hi\"\"\",\n,0.5\n");

        // independent reader agrees on the field values
        let mut reader = csv::ReaderBuilder::new().from_reader(out.as_bytes());
        let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
        assert_eq!(&records[0][0], "say \"hi\"");
        assert_eq!(&records[1][1], "0.5");
    }
}
