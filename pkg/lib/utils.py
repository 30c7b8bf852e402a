"""
╔════════════════════════════════════════════════════════════════════════════════╗
║                                                                                ║
║   Wasserstein DRO Regression Toolkit                                           ║
║                                                                                ║
║   Utility functions for report generation: exports the results ledger to a     ║
║   formatted Excel workbook with a summary view and a field reference sheet.    ║
║                                                                                ║
╚════════════════════════════════════════════════════════════════════════════════╝
"""

import os
import logging
import pandas as pd
from sqlalchemy import create_engine, inspect
import datetime
from openpyxl.styles import Font, Alignment, PatternFill, Border, Side
from openpyxl.utils import get_column_letter
from openpyxl.worksheet.table import Table, TableStyleInfo

logger = logging.getLogger(__name__)

SUMMARY_METRICS = ['wmse', 'cvar_wmse', 'ccr', 'logloss', 'cvar_logloss', 'mpd', 'bound']


def export_results_to_excel(db_path, export_folder=None):
    """
    Export the results ledger to Excel

    Args:
        db_path: Path to the SQLite database
        export_folder: Folder to save the Excel file (defaults to database folder)

    Returns:
        str: Path to the exported Excel file, or None on failure
    """
    try:
        if not export_folder:
            export_folder = os.path.dirname(os.path.abspath(db_path))
        os.makedirs(export_folder, exist_ok=True)
        excel_path = os.path.join(export_folder, "dro_results.xlsx")

        engine = create_engine(f"sqlite:///{db_path}")
        tables = inspect(engine).get_table_names()
        if 'results' not in tables or 'experiments' not in tables:
            logger.error(f"{db_path} holds no results ledger")
            return None

        with pd.ExcelWriter(excel_path, engine='openpyxl') as writer:
            create_metadata_sheet(writer)

            summary_df = build_summary(engine)
            if not summary_df.empty:
                summary_df.to_excel(writer, sheet_name='Summary', index=False)
                format_sheet(writer.sheets['Summary'], summary_df, 'Summary', is_main_view=True)

            for table_name in ('experiments', 'results'):
                df = pd.read_sql_query(f"SELECT * FROM {table_name}", engine)
                for col in df.columns:
                    if col.endswith('_at') and df[col].dtype == 'object':
                        df[col] = pd.to_datetime(df[col])
                df.to_excel(writer, sheet_name=table_name, index=False)
                format_sheet(writer.sheets[table_name], df, table_name)
                logger.debug(f"Exported table {table_name} with {len(df)} rows")

        logger.info(f"Results exported to Excel: {excel_path}")
        return excel_path

    except Exception as e:
        logger.error(f"Error exporting results to Excel: {str(e)}")
        return None


def build_summary(engine):
    """Mean and standard deviation of each metric per experiment, fraction and method"""
    query = """
    SELECT e.id AS experiment_id, e.kind, r.fraction, r.method, r.wmse, r.cvar_wmse, r.ccr,
           r.logloss, r.cvar_logloss, r.mpd, r.bound
    FROM results r
    JOIN experiments e ON r.experiment_id = e.id
    ORDER BY e.id, r.fraction, r.id
    """
    df = pd.read_sql_query(query, engine)
    if df.empty:
        return df
    grouped = df.groupby(['experiment_id', 'kind', 'fraction', 'method'], sort=False)[SUMMARY_METRICS]
    summary = grouped.agg(['mean', 'std'])
    summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
    summary = summary.dropna(axis=1, how='all').reset_index()
    return summary


def format_sheet(worksheet, df, table_name, is_main_view=False):
    """Format an Excel worksheet with styling and auto-width columns"""
    header_fill = PatternFill(start_color="1F4E78", end_color="1F4E78", fill_type="solid")
    header_font = Font(bold=True, color="FFFFFF")
    border = Border(
        left=Side(border_style="thin", color="000000"),
        right=Side(border_style="thin", color="000000"),
        top=Side(border_style="thin", color="000000"),
        bottom=Side(border_style="thin", color="000000")
    )

    long_content_columns = ['error', 'config_json']

    for idx, col in enumerate(df.columns):
        column_letter = get_column_letter(idx + 1)
        if any(long_name in col.lower() for long_name in long_content_columns):
            worksheet.column_dimensions[column_letter].width = 50
        else:
            max_length = max(
                df[col].astype(str).map(len).max() if len(df) else 0,
                len(str(col))
            )
            worksheet.column_dimensions[column_letter].width = min(max_length + 2, 24)

    for cell in worksheet[1]:
        cell.fill = header_fill
        cell.font = header_font
        cell.alignment = Alignment(horizontal="center", vertical="center", wrap_text=True)
        cell.border = border

    error_idx = list(df.columns).index('error') if 'error' in df.columns else None

    for row in worksheet.iter_rows(min_row=2, max_row=worksheet.max_row):
        for cell_idx, cell in enumerate(row):
            col_name = df.columns[cell_idx]
            if col_name.lower() in long_content_columns and cell.value:
                cell.alignment = Alignment(wrap_text=True, vertical="top")
            else:
                cell.alignment = Alignment(vertical="center")
            if isinstance(cell.value, float):
                cell.number_format = '0.0000'

        # Rows whose fit or evaluation failed are tinted
        if error_idx is not None and row[error_idx].value:
            for cell in row:
                cell.fill = PatternFill(start_color="FFEEEE", end_color="FFEEEE", fill_type="solid")
            row[error_idx].font = Font(bold=True, color="990000")

    if len(df):
        table = Table(displayName=f"Table_{table_name.replace(' ', '_')}", ref=worksheet.dimensions)
        table.tableStyleInfo = TableStyleInfo(
            name="TableStyleMedium2" if is_main_view else "TableStyleMedium9",
            showFirstColumn=False,
            showLastColumn=False,
            showRowStripes=True,
            showColumnStripes=False
        )
        worksheet.add_table(table)

    worksheet.freeze_panes = 'A2'


def create_metadata_sheet(writer):
    """Create a metadata/help sheet with field descriptions"""
    workbook = writer.book
    metadata_sheet = workbook.create_sheet("Info", 0)
    workbook.active = 0

    title_font = Font(size=14, bold=True, color="1F4E78")
    header_font = Font(bold=True)
    header_fill = PatternFill(start_color="E0E0E0", end_color="E0E0E0", fill_type="solid")

    metadata_sheet['A1'] = "Wasserstein DRO Experiment Results"
    metadata_sheet['A1'].font = title_font
    metadata_sheet.merge_cells('A1:C1')
    metadata_sheet['A1'].alignment = Alignment(horizontal="center")

    metadata_sheet['A3'] = "Export Date:"
    metadata_sheet['B3'] = datetime.datetime.now().strftime("%Y-%m-%d %H:%M:%S")

    metadata_sheet['A5'] = "This workbook contains the following sheets:"
    metadata_sheet['A5'].font = header_font

    sheet_descriptions = [
        ("Info", "This information sheet with field descriptions"),
        ("Summary", "Mean and standard deviation per experiment, outlier fraction and method"),
        ("experiments", "One row per experiment invocation with its configuration"),
        ("results", "One row per run, outlier fraction and method"),
    ]
    for i, (sheet_name, desc) in enumerate(sheet_descriptions):
        metadata_sheet[f'A{6 + i}'] = sheet_name
        metadata_sheet[f'B{6 + i}'] = desc

    start = 7 + len(sheet_descriptions)
    metadata_sheet[f'A{start}'] = "Field Descriptions:"
    metadata_sheet[f'A{start}'].font = header_font

    header_row = start + 1
    for column, title in zip('ABC', ("Field Name", "Description", "Data Type")):
        cell = metadata_sheet[f'{column}{header_row}']
        cell.value = title
        cell.font = header_font
        cell.fill = header_fill

    field_descriptions = [
        ("run", "Replication index within the experiment", "Integer"),
        ("seed", "Master seed of the experiment; with run it reproduces the row's data", "Integer"),
        ("fraction", "Share of contaminated samples", "Decimal"),
        ("method", "Estimator key (e.g. mlr_1s, ols, mlg_sr)", "Text"),
        ("wmse", "Test error weighted by the inverse training error covariance", "Decimal"),
        ("cvar_wmse", "Mean of the worst 20% weighted squared errors", "Decimal"),
        ("ccr", "Correct classification rate", "Decimal"),
        ("logloss", "Average test log-loss", "Decimal"),
        ("cvar_logloss", "Mean of the worst 20% test log-losses", "Decimal"),
        ("mpd", "Smallest l1 perturbation that changes a predicted label", "Decimal"),
        ("bound", "Generalization bound on the expected log-loss", "Decimal"),
        ("epsilon", "Selected Wasserstein radius", "Decimal"),
        ("lambda", "Selected penalty weight", "Decimal"),
        ("n_components", "Selected number of principal components", "Integer"),
        ("error", "Failure message when the fit or evaluation failed", "Text"),
    ]
    for i, (field, desc, dtype) in enumerate(field_descriptions):
        row = header_row + 1 + i
        metadata_sheet[f'A{row}'] = field
        metadata_sheet[f'B{row}'] = desc
        metadata_sheet[f'C{row}'] = dtype

    metadata_sheet.column_dimensions['A'].width = 18
    metadata_sheet.column_dimensions['B'].width = 70
    metadata_sheet.column_dimensions['C'].width = 12
