//! Quirk share links.
//!
//! Quirk encodes a circuit as `{"cols": [[cell, ...], ...]}` where each inner
//! array is one time step and the cell at position `i` acts on qubit `i`.
//! Links carry that JSON percent-encoded after `#circuit=`.
//!
//! Accepted cells: `"H" "X" "Y" "Z" "S" "T" "•" "Measure"`, identity as `1`
//! or `"1"`, and Quirk's own spellings of the phase gates (`"Z^½"`,
//! `"Z^¼"`, `"Z^-½"`, `"Z^-¼"`). A column holding controls turns every
//! X target into CX (one control) or CCX (two controls) and a single Z
//! target into CZ; anything else under a control is rejected.

use percent_encoding::percent_decode_str;
use serde_json::Value;

use super::{Circuit, CircuitError, GateKind, Instruction};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Cell {
    Identity,
    Control,
    Measure,
    Gate(GateKind),
}

fn cell(value: &Value) -> Result<Cell, CircuitError> {
    let token = match value {
        Value::Number(n) if n.as_f64() == Some(1.0) => return Ok(Cell::Identity),
        Value::String(s) => s.as_str(),
        other => return Err(CircuitError::UnsupportedCell(other.to_string())),
    };
    Ok(match token {
        "1" => Cell::Identity,
        "•" => Cell::Control,
        "Measure" => Cell::Measure,
        "H" => Cell::Gate(GateKind::H),
        "X" => Cell::Gate(GateKind::X),
        "Y" => Cell::Gate(GateKind::Y),
        "Z" => Cell::Gate(GateKind::Z),
        "S" | "Z^½" => Cell::Gate(GateKind::S),
        "T" | "Z^¼" => Cell::Gate(GateKind::T),
        "Z^-½" => Cell::Gate(GateKind::Sdg),
        "Z^-¼" => Cell::Gate(GateKind::Tdg),
        other => return Err(CircuitError::UnsupportedCell(format!("{other:?}"))),
    })
}

fn extract_json(input: &str) -> Result<String, CircuitError> {
    let trimmed = input.trim();
    if trimmed.starts_with('{') {
        return Ok(trimmed.to_string());
    }
    let Some(idx) = trimmed.find("circuit=") else {
        return Err(CircuitError::Syntax {
            line: 1,
            column: 1,
            message: "expected Quirk JSON or a URL containing `#circuit=`".into(),
        });
    };
    let encoded = &trimmed[idx + "circuit=".len()..];
    let encoded = encoded.split('&').next().unwrap_or(encoded);
    percent_decode_str(encoded)
        .decode_utf8()
        .map(|s| s.into_owned())
        .map_err(|e| CircuitError::Syntax {
            line: 1,
            column: idx + 1,
            message: format!("invalid percent-encoding: {e}"),
        })
}

/// Parses a Quirk share URL or its bare JSON into a measured circuit.
pub fn parse_quirk(url_or_json: &str) -> Result<Circuit, CircuitError> {
    let json = extract_json(url_or_json)?;
    let doc: Value = serde_json::from_str(&json).map_err(|e| CircuitError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Some(cols) = doc.get("cols").and_then(Value::as_array) else {
        return Err(CircuitError::Syntax {
            line: 1,
            column: 1,
            message: "missing `cols` array".into(),
        });
    };

    let mut grid: Vec<Vec<Cell>> = Vec::with_capacity(cols.len());
    for col in cols {
        let Some(cells) = col.as_array() else {
            return Err(CircuitError::UnsupportedCell(col.to_string()));
        };
        grid.push(cells.iter().map(cell).collect::<Result<_, _>>()?);
    }

    let num_qubits = grid
        .iter()
        .flat_map(|col| {
            col.iter()
                .enumerate()
                .filter(|(_, c)| **c != Cell::Identity)
                .map(|(row, _)| row + 1)
        })
        .max()
        .unwrap_or(0);
    let mut circuit = Circuit::new("quirk", num_qubits, num_qubits);

    for (column, cells) in grid.iter().enumerate() {
        let controls: Vec<usize> = rows_where(cells, |c| c == Cell::Control);
        if controls.is_empty() {
            for (row, c) in cells.iter().enumerate() {
                match c {
                    Cell::Gate(kind) => {
                        circuit.push(Instruction::gate(*kind, [row]));
                    }
                    Cell::Measure => {
                        circuit.push(Instruction::measure(row, row));
                    }
                    Cell::Identity | Cell::Control => {}
                }
            }
            continue;
        }
        let layout = |reason: &str| CircuitError::UnsupportedLayout {
            column,
            reason: reason.to_string(),
        };
        if controls.len() > 2 {
            return Err(layout("more than two controls"));
        }
        let targets: Vec<(usize, Cell)> = cells
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, c)| !matches!(c, Cell::Identity | Cell::Control))
            .collect();
        for (row, c) in targets {
            let inst = match (controls.as_slice(), c) {
                ([ctl], Cell::Gate(GateKind::X)) => Instruction::gate(GateKind::Cx, [*ctl, row]),
                ([ctl], Cell::Gate(GateKind::Z)) => Instruction::gate(GateKind::Cz, [*ctl, row]),
                ([a, b], Cell::Gate(GateKind::X)) => Instruction::gate(GateKind::Ccx, [*a, *b, row]),
                _ => return Err(layout("only X (one or two controls) or Z (one control) may be controlled")),
            };
            circuit.push(inst);
        }
    }

    let circuit = circuit.ensure_measurements();
    circuit.validate()?;
    Ok(circuit)
}

fn rows_where(cells: &[Cell], pred: impl Fn(Cell) -> bool) -> Vec<usize> {
    cells
        .iter()
        .enumerate()
        .filter(|(_, c)| pred(**c))
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_from_json() {
        let c = parse_quirk(r#"{"cols":[["H"],["•","X"]]}"#).unwrap();
        assert_eq!(c.num_qubits, 2);
        assert_eq!(c.num_clbits, 2);
        assert_eq!(
            c.instructions,
            vec![
                Instruction::gate(GateKind::H, [0]),
                Instruction::gate(GateKind::Cx, [0, 1]),
                Instruction::measure(0, 0),
                Instruction::measure(1, 1),
            ]
        );
    }

    #[test]
    fn bell_from_url() {
        let url = "https://algassert.com/quirk#circuit=%7B%22cols%22%3A%5B%5B%22H%22%5D%2C%5B%22%E2%80%A2%22%2C%22X%22%5D%5D%7D";
        let from_url = parse_quirk(url).unwrap();
        let from_json = parse_quirk(r#"{"cols":[["H"],["•","X"]]}"#).unwrap();
        assert_eq!(from_url, from_json);
    }

    #[test]
    fn single_x() {
        let c = parse_quirk(r#"{"cols":[["X"]]}"#).unwrap();
        assert_eq!(c.num_qubits, 1);
        assert_eq!(
            c.instructions,
            vec![Instruction::gate(GateKind::X, [0]), Instruction::measure(0, 0)]
        );
    }

    #[test]
    fn unknown_cell_rejected() {
        assert!(matches!(
            parse_quirk(r#"{"cols":[["?"]]}"#),
            Err(CircuitError::UnsupportedCell(_))
        ));
        assert!(matches!(
            parse_quirk(r#"{"cols":[[{"id":"custom"}]]}"#),
            Err(CircuitError::UnsupportedCell(_))
        ));
    }

    #[test]
    fn non_json_is_syntax_error() {
        assert!(matches!(parse_quirk("{cols:"), Err(CircuitError::Syntax { .. })));
        assert!(matches!(parse_quirk("hello"), Err(CircuitError::Syntax { .. })));
    }

    #[test]
    fn identity_padding_and_explicit_measure() {
        let c = parse_quirk(r#"{"cols":[[1,"H",1],["Measure","Measure"],[1,1,1,1]]}"#).unwrap();
        assert_eq!(c.num_qubits, 2);
        assert_eq!(
            c.instructions,
            vec![
                Instruction::gate(GateKind::H, [1]),
                Instruction::measure(0, 0),
                Instruction::measure(1, 1),
            ]
        );
    }

    #[test]
    fn toffoli_and_layout_limits() {
        let c = parse_quirk(r#"{"cols":[["•","•","X"]]}"#).unwrap();
        assert_eq!(c.instructions[0], Instruction::gate(GateKind::Ccx, [0, 1, 2]));
        assert!(matches!(
            parse_quirk(r#"{"cols":[["•","•","•","X"]]}"#),
            Err(CircuitError::UnsupportedLayout { column: 0, .. })
        ));
        assert!(matches!(
            parse_quirk(r#"{"cols":[["H"],["•","H"]]}"#),
            Err(CircuitError::UnsupportedLayout { column: 1, .. })
        ));
    }

    #[test]
    fn quirk_phase_spellings() {
        let c = parse_quirk(r#"{"cols":[["Z^½","Z^¼","S","T"]]}"#).unwrap();
        let kinds: Vec<GateKind> = c.instructions.iter().take(4).map(|i| i.kind).collect();
        assert_eq!(kinds, vec![GateKind::S, GateKind::T, GateKind::S, GateKind::T]);
    }
}
