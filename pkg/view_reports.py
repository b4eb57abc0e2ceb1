from report_logger import ReportLogger

logger = ReportLogger()

# Last 5 runs
logger.print_summary_report(limit=5)

# Export to CSV for plotting
logger.export_to_csv()
print("✅ Data exported! Open the CSV to plot bounds against measurements")
