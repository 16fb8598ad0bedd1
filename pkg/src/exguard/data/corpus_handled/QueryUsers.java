import java.sql.Connection;
import java.sql.DriverManager;

public class QueryUsers {
    public static void main(String[] args) {
        String url = args[0];
        try {
            Connection connection = DriverManager.getConnection(url, "app", "secret");
        } catch (SQLException ex) {
            System.err.println("Database access failed: " + ex.getMessage());
            ex.printStackTrace();
        }
        System.out.println("connected to " + url);
    }
}
